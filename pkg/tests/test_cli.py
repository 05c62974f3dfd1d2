import csv
import json

import pytest

from cwstein import cli


def _write(tmp_path, name, payload):
    p = tmp_path / name
    p.write_text(json.dumps(payload))
    return str(p)


def _run(tmp_path, payload, *extra):
    cfg = _write(tmp_path, "cfg.json", payload)
    out = tmp_path / "out"
    return cli.main([payload["command"], "--config", cfg,
                     "--out", str(out), *extra]), out


def test_analyze_measure(tmp_path, capsys):
    code, out = _run(tmp_path, {"command": "analyze-measure",
                                "measure": {"kind": "bernoulli"}})
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["critical_beta"] == pytest.approx(1.0)
    assert result["ghs"]["holds"] is True
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["effective_config"]["seed"] == 0
    assert "criterion" not in capsys.readouterr().out  # sanity on stdout


def test_minimize_g(tmp_path):
    code, out = _run(tmp_path, {"command": "minimize-g",
                                "measure": {"kind": "bernoulli"},
                                "beta": 1.5})
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert len(result["minima"]) == 2
    assert result["k_star"] == 1


def test_config_schema_rejection(tmp_path):
    code, _ = _run(tmp_path, {"command": "analyze-measure",
                              "measure": {"kind": "not-a-measure"}})
    assert code == cli.EXIT_CONFIG


def test_command_mismatch(tmp_path):
    cfg = _write(tmp_path, "cfg.json", {"command": "minimize-g",
                                        "measure": {"kind": "bernoulli"}})
    assert cli.main(["analyze-measure", "--config", cfg]) == cli.EXIT_CONFIG


def test_unknown_key_rejected(tmp_path):
    code, _ = _run(tmp_path, {"command": "minimize-g",
                              "measure": {"kind": "bernoulli"},
                              "betta": 1.5})
    assert code == cli.EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert cli.main(["exact", "--config",
                     str(tmp_path / "nope.json")]) == cli.EXIT_CONFIG


def test_budget_exit_code(tmp_path):
    code, _ = _run(tmp_path, {"command": "exact",
                              "measure": {"kind": "three_state"},
                              "n": 10_000_000, "beta": 1.0})
    assert code == cli.EXIT_BUDGET


def test_exact_fixture_layout(tmp_path):
    code, out = _run(tmp_path, {"command": "exact",
                                "measure": {"kind": "bernoulli"},
                                "n": 8, "beta": 0.5, "fixtures": True})
    assert code == 0
    fixture = out / "fixtures" / "bernoulli" / "0.5" / "8.csv"
    assert fixture.exists()
    with open(fixture) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["s", "prob"]
    assert len(rows) == 10  # header + 9 support points
    total = sum(float(r[1]) for r in rows[1:])
    assert total == pytest.approx(1.0, abs=1e-12)


def test_seed_override_lands_in_manifest(tmp_path):
    cfg = _write(tmp_path, "cfg.json",
                 {"command": "simulate", "measure": {"kind": "bernoulli"},
                  "n": 16, "beta": 0.5, "sample_count": 256,
                  "regime": {"kind": "clt", "sigma2": 2.0}})
    out = tmp_path / "out"
    code = cli.main(["simulate", "--config", cfg, "--out", str(out),
                     "--seed", "99"])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["effective_config"]["seed"] == 99
    result = json.loads((out / "result.json").read_text())
    assert result["count"] >= 256


def test_stein_bounds_artifacts(tmp_path):
    code, out = _run(tmp_path, {"command": "stein-bounds",
                                "law": {"family": "gaussian", "sigma2": 1.0}})
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["d2"] <= 1.0 + 1e-6
    with open(out / "per_z.csv") as fh:
        header = fh.readline().strip()
    assert header == "z,sup_f,sup_fprime,osc_fprime,sup_psif_prime"


def test_ursell_check_command(tmp_path):
    code, out = _run(tmp_path, {"command": "ursell-check",
                                "measure": {"kind": "bernoulli"},
                                "n": 6, "beta": 1.0,
                                "sites": [0, 1, 2, 3]})
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["ursell"] <= 1e-10


def test_ursell_bad_sites(tmp_path):
    code, _ = _run(tmp_path, {"command": "ursell-check",
                              "measure": {"kind": "bernoulli"},
                              "n": 4, "beta": 1.0, "sites": [0, 1, 2, 9]})
    assert code == cli.EXIT_CONFIG


def test_hubbard_check_command(tmp_path):
    code, out = _run(tmp_path, {"command": "hubbard-check",
                                "measure": {"kind": "bernoulli"},
                                "n": 32, "beta": 0.5, "gamma_exp": 0.5})
    assert code == 0
    result = json.loads((out / "result.json").read_text())
    assert result["sup_discrepancy"] < 1e-8
