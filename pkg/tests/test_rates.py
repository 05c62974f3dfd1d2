import math

import numpy as np
import pytest

from cwstein import limit_laws, measures, oracle, pair, rates


def test_regime_classification_map():
    assert rates.classify_beta_regime(1, 0.5, 1.0).name == "critical_window"
    assert rates.classify_beta_regime(-1, 0.75, 1.0).name == "sub_window"
    assert rates.classify_beta_regime(1, 2.0, 1.0).name == "critical_rate"
    assert rates.classify_beta_regime(1, 0.5, 0.0).name == "critical_rate"
    assert rates.classify_beta_regime(-1, 0.1, 1.0).name == "clt_with_rate"
    assert rates.classify_beta_regime(-1, 0.3, 1.0).name == "clt_window"
    # window moves with the flatness type: exponent 1 - 1/k
    assert rates.classify_beta_regime(1, 2.0 / 3.0, 1.0, k=3).name == \
        "critical_window"
    assert rates.classify_beta_regime(1, 5.0 / 6.0, 1.0, k=3).name == \
        "sub_window"


def test_dkw_band_value():
    band = rates.dkw_band(10_000)
    assert band == pytest.approx(math.sqrt(math.log(200.0) / 20_000.0),
                                 rel=1e-12)
    assert rates.dkw_band(40_000) == pytest.approx(band / 2.0, rel=1e-12)


def test_empirical_kolmogorov_hand_value():
    law = limit_laws.gaussian(1.0)
    # a single sample at 0: sup|F_1 - Phi| = 1/2
    assert rates.empirical_kolmogorov(np.array([0.0]), law) == \
        pytest.approx(0.5, rel=1e-12)
    d = rates.empirical_kolmogorov(law.sample(50_000, seed=0), law)
    assert d < rates.dkw_band(50_000)


def test_fit_rate_recovers_power_law():
    pts = [rates.RatePoint(n=n, distance=3.0 * n**-0.5, method="exact")
           for n in (16, 32, 64, 128, 256)]
    fit = rates.fit_rate(pts)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_rate_needs_enough_points():
    pts = [rates.RatePoint(n=n, distance=1.0 / n, method="exact")
           for n in (2, 4, 8)]
    with pytest.raises(rates.RateError):
        rates.fit_rate(pts)


def test_unusable_points_excluded_from_fit():
    pts = [rates.RatePoint(n=n, distance=n**-0.5, method="mc")
           for n in (16, 32, 64, 128)]
    pts.append(rates.RatePoint(n=256, distance=1e-9, method="mc",
                               usable=False))
    fit = rates.fit_rate(pts)
    assert fit.slope == pytest.approx(-0.5, abs=1e-12)
    assert len(fit.points) == 5


def test_wasserstein_point_mass():
    # degenerate law at 0 against N(0,1): W1 = E|Z| = sqrt(2/pi)
    d = rates.wasserstein_distance(np.array([0.0]), np.array([1.0]),
                                   0.0, 1.0, limit_laws.gaussian(1.0))
    assert d == pytest.approx(math.sqrt(2.0 / math.pi), abs=1e-3)


def test_mc_kolmogorov_sample_floor():
    m = measures.construct_measure("bernoulli")
    regime = pair.make_regime("clt", 16, sigma2=2.0)
    with pytest.raises(rates.RateError):
        rates.mc_kolmogorov(m, 16, 0.5, regime, limit_laws.gaussian(2.0),
                            100, seed=0)


def test_run_rate_experiment_artifacts(tmp_path):
    m = measures.construct_measure("bernoulli")
    csv_path = tmp_path / "points.csv"
    svg_path = tmp_path / "fit.svg"
    fit = rates.run_rate_experiment(
        m, 0.5, [16, 32, 64, 128, 256], 0.5, limit_laws.gaussian(2.0),
        csv_path=csv_path, svg_path=svg_path)
    assert -0.8 <= fit.slope <= -0.3
    text = csv_path.read_text()
    assert text.splitlines()[0] == "n,distance,std_error,method,usable"
    assert len(text.splitlines()) == 6
    svg = svg_path.read_bytes()
    assert svg.startswith(b"<?xml")
    # no wall-clock timestamps: byte-identical on re-render
    svg2_path = tmp_path / "fit2.svg"
    rates.plot_loglog(fit, svg2_path)
    assert svg2_path.read_bytes() == svg


def test_exact_distance_decreases(tmp_path):
    m = measures.construct_measure("bernoulli")
    target = limit_laws.gaussian(2.0)
    ds = []
    for n in (32, 256):
        law = oracle.exact_law(m, n, 0.5)
        ds.append(oracle.exact_kolmogorov(law, 0.0, math.sqrt(n), target))
    assert ds[1] < ds[0]
