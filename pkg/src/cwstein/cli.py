"""Batch front door: JSON experiment configs in, CSV/JSON/SVG artifacts out.

Exit codes: 0 success, 2 config validation failure, 3 enumeration budget
exceeded, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, free_energy, limit_laws, measures, oracle, pair, \
    rates, stein

EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_NUMERIC = 4

MEASURE_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["bernoulli", "three_state", "trinomial",
                          "uniform", "gibbs_density"]},
        "a": {"type": "number"},
        "half_width": {"type": "number", "exclusiveMinimum": 0},
        "coefficients": {"type": "object"},
    },
    "required": ["kind"],
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "command": {"enum": ["analyze-measure", "minimize-g", "stein-bounds",
                             "simulate", "exact", "rates", "hubbard-check",
                             "ursell-check"]},
        "measure": MEASURE_SCHEMA,
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "beta_seq": {
            "type": "object",
            "properties": {
                "sign": {"enum": [-1, 1]},
                "exponent": {"type": "number"},
                "gamma": {"type": "number", "minimum": 0},
            },
            "required": ["sign", "exponent", "gamma"],
        },
        "n": {"type": "integer", "minimum": 1},
        "n_grid": {"type": "array", "items": {"type": "integer", "minimum": 2},
                   "minItems": 1},
        "law": {"type": "object"},
        "regime": {"type": "object"},
        "method": {"enum": ["exact", "mc"]},
        "gamma_scale": {"type": "number"},
        "center": {"type": "number"},
        "mcenter": {"type": "number"},
        "gamma_exp": {"type": "number"},
        "sites": {"type": "array", "items": {"type": "integer"}},
        "sample_count": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "workers": {"type": "integer", "minimum": 1},
        "out": {"type": "string"},
        "s_max": {"type": "number", "exclusiveMinimum": 0},
        "grid_points": {"type": "integer", "minimum": 100},
        "fixtures": {"type": "boolean"},
    },
    "required": ["command"],
    "additionalProperties": False,
}

DEFAULTS = {
    "seed": 0,
    "workers": 1,
    "out": "out",
    "s_max": 10.0,
    "grid_points": 4096,
    "method": "exact",
    "sample_count": 20000,
    "beta": 1.0,
    "gamma_scale": 0.5,
    "center": 0.0,
    "mcenter": 0.0,
    "gamma_exp": 0.75,
    "fixtures": False,
}


class ConfigError(ValueError):
    pass


def parse_config(path) -> dict:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        field = "/".join(str(p) for p in exc.absolute_path) or "(top level)"
        raise ConfigError(f"config field {field}: {exc.message}") from exc
    cfg = dict(DEFAULTS)
    cfg.update(raw)
    return cfg


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True,
                               default=_json_default) + "\n")


def _manifest(out: Path, cfg: dict):
    _write_json(out / "manifest.json", {
        "effective_config": cfg,
        "package_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    })


def _regime_from_config(cfg: dict, n: int) -> pair.Regime:
    r = dict(cfg.get("regime") or {"kind": "clt",
                                   "sigma2": 1.0 / (1.0 - cfg["beta"])})
    kind = r.pop("kind")
    return pair.make_regime(kind, n, **r)


def _beta_of_n(cfg):
    seq = cfg.get("beta_seq")
    if seq is None:
        return None
    return lambda n: 1.0 + seq["sign"] * seq["gamma"] * n ** (-seq["exponent"])


# -- subcommand bodies ------------------------------------------------------


def cmd_analyze_measure(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    ghs = measures.check_ghs(m, cfg["s_max"], cfg["grid_points"])
    result = {
        "label": m.label,
        "variance": m.variance,
        "critical_beta": free_energy.critical_beta(m),
        "cgf_at_1": measures.cgf(m, 1.0),
        "ghs": {"holds": ghs.holds, "worst_point": ghs.worst_point,
                "worst_value": ghs.worst_value},
    }
    _write_json(out / "result.json", result)
    print(f"critical_beta={result['critical_beta']:.6g} "
          f"ghs_holds={ghs.holds}")
    return 0


def cmd_minimize_g(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    profile = free_energy.find_minima(m, cfg["beta"])
    _write_json(out / "result.json", profile.to_dict())
    for p in profile.minima:
        print(f"alpha={p.alpha:+.8f} k={p.type_k} mu={p.strength_mu:.8f} "
              f"global={p.is_global}")
    return 0


def cmd_stein_bounds(cfg, out: Path):
    law = limit_laws.build_law(cfg.get("law", {"family": "gaussian",
                                              "sigma2": 1.0}))
    report = stein.estimate_bound_constants(law)
    _write_json(out / "result.json", report.to_dict())
    with open(out / "per_z.csv", "w") as fh:
        fh.write("z,sup_f,sup_fprime,osc_fprime,sup_psif_prime\n")
        for row in report.per_z:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    print(" ".join(f"{k}={v:.6g}" for k, v in report.to_dict().items()))
    return 0


def cmd_simulate(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    n = cfg.get("n", 64)
    regime = _regime_from_config(cfg, n)
    stats = pair.pair_statistics(m, n, cfg["beta"], regime,
                                 cfg["sample_count"], cfg["seed"])
    _write_json(out / "result.json", stats.to_dict())
    print(f"E[W^2]={stats.e_w2:.6g} (se {stats.e_w2_se:.2g}) "
          f"E|R|={stats.e_abs_r:.3g} count={stats.count}")
    return 0


def cmd_exact(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    n = cfg.get("n", 64)
    law = oracle.exact_law(m, n, cfg["beta"])
    if cfg["fixtures"]:
        fix = out / "fixtures" / m.label / f"{cfg['beta']:g}"
        fix.mkdir(parents=True, exist_ok=True)
        law.to_csv(fix / f"{n}.csv")
    law.to_csv(out / "law.csv")
    _write_json(out / "result.json", {
        "n": n, "beta": cfg["beta"], "support_size": len(law.support),
        "variance_of_s": oracle.exact_moment(law, 0.0, 1.0, 2),
    })
    print(f"support_size={len(law.support)}")
    return 0


def cmd_rates(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    n_grid = cfg.get("n_grid") or [2**e for e in range(6, 13)]
    target = limit_laws.build_law(cfg.get("law", {"family": "gaussian",
                                                  "sigma2": 1.0}))
    fit = rates.run_rate_experiment(
        m, cfg["beta"], n_grid, cfg["gamma_scale"], target,
        center=cfg["center"], method=cfg["method"],
        beta_of_n=_beta_of_n(cfg), mc_samples=cfg["sample_count"],
        seed=cfg["seed"], csv_path=out / "points.csv",
        svg_path=out / "fit.svg")
    _write_json(out / "result.json", fit.to_dict())
    print(f"slope={fit.slope:.4f} r2={fit.r_squared:.4f}")
    return 0


def cmd_hubbard_check(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    rep = oracle.hubbard_density_check(m, cfg.get("n", 32), cfg["beta"],
                                       cfg["mcenter"], cfg["gamma_exp"])
    _write_json(out / "result.json", {
        "sup_discrepancy": rep.sup_discrepancy,
        "normalization_gap": rep.normalization_gap,
    })
    print(f"sup_discrepancy={rep.sup_discrepancy:.3g}")
    return 0


def cmd_ursell_check(cfg, out: Path):
    m = measures.construct_measure(cfg["measure"])
    n = cfg.get("n", 6)
    sites = tuple(cfg.get("sites") or (0, 1, 2, 3))
    if len(sites) != 4 or any(not 0 <= s < n for s in sites):
        raise ConfigError("sites must be four indices below n")
    rep = oracle.ursell_check(m, n, cfg["beta"], sites)
    _write_json(out / "result.json", {
        "ursell": rep.ursell, "ghs2": rep.ghs2, "sites": list(rep.sites),
    })
    print(f"ursell={rep.ursell:.6g} ghs2={rep.ghs2:.6g}")
    return 0


COMMANDS = {
    "analyze-measure": cmd_analyze_measure,
    "minimize-g": cmd_minimize_g,
    "stein-bounds": cmd_stein_bounds,
    "simulate": cmd_simulate,
    "exact": cmd_exact,
    "rates": cmd_rates,
    "hubbard-check": cmd_hubbard_check,
    "ursell-check": cmd_ursell_check,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cwstein",
        description="Mean-field spin experiments driven by JSON configs")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--out")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if cfg["command"] != args.command:
            raise ConfigError(
                f"config command {cfg['command']!r} does not match "
                f"subcommand {args.command!r}")
        for key in ("seed", "workers", "out"):
            val = getattr(args, key)
            if val is not None:
                cfg[key] = val
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    _manifest(out, cfg)
    try:
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except oracle.BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (measures.MeasureError, limit_laws.LawError, pair.PairError,
            rates.RateError, free_energy.MinimizationError,
            ValueError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
