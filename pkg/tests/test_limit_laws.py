import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from cwstein import limit_laws

FAMILIES = [
    limit_laws.gaussian(1.0),
    limit_laws.gaussian(2.0),
    limit_laws.critical_classic(),
    limit_laws.power(2, 2.0),
    limit_laws.power(3, 6.0),
    limit_laws.f_gamma(1.0),
]


def test_quartic_normalizer_closed_form():
    # integral of exp(-x^4/12) = 2 Gamma(5/4) 12^(1/4)
    law = limit_laws.critical_classic()
    assert law.Z == pytest.approx(2.0 * math.gamma(1.25) * 12.0**0.25,
                                  rel=1e-10)


def test_power_k2_mu2_matches_quartic():
    # mu x^4 / 4! with mu = 2 is the same exponent as x^4/12
    a = limit_laws.power(2, 2.0)
    b = limit_laws.critical_classic()
    assert a.Z == pytest.approx(b.Z, rel=1e-12)
    x = np.linspace(-3, 3, 11)
    assert np.allclose(a.cdf(x), b.cdf(x), atol=1e-12)


def test_gaussian_cdf_exact():
    law = limit_laws.gaussian(2.0)
    for z in (-1.5, 0.0, 0.7):
        ref = 0.5 * (1.0 + math.erf(z / math.sqrt(2.0 * 2.0)))
        assert float(law.cdf(z)) == pytest.approx(ref, abs=1e-14)


@pytest.mark.parametrize("law", FAMILIES, ids=lambda l: repr(l.to_descriptor()))
def test_cdf_symmetry_and_range(law):
    x = np.linspace(-6, 6, 41)
    f = np.asarray(law.cdf(x))
    assert np.all((0 <= f) & (f <= 1))
    assert np.allclose(f + np.asarray(law.cdf(-x)), 1.0, atol=1e-9)
    assert float(law.cdf(0.0)) == pytest.approx(0.5, abs=1e-10)


@pytest.mark.parametrize("law", FAMILIES, ids=lambda l: repr(l.to_descriptor()))
def test_psi_is_log_density_slope(law):
    h = 1e-6
    for x in (-2.3, -0.4, 0.9, 3.1):
        fd = (float(law.log_density_unnorm(x + h))
              - float(law.log_density_unnorm(x - h))) / (2 * h)
        assert float(law.psi(x)) == pytest.approx(fd, abs=1e-6)
        fd2 = (float(law.psi(x + h)) - float(law.psi(x - h))) / (2 * h)
        assert float(law.psi_prime(x)) == pytest.approx(fd2, abs=1e-5)


def test_gaussian_tail_ratio_matches_mills():
    law = limit_laws.gaussian(1.0)
    for x in (0.5, 2.0, 6.0, 20.0):
        ref = stats.norm.sf(x) / stats.norm.pdf(x) if x < 8 else \
            float(np.exp(stats.norm.logsf(x) - stats.norm.logpdf(x)))
        assert law.upper_tail_ratio(x) == pytest.approx(ref, rel=1e-8)
    assert law.lower_tail_ratio(-3.0) == pytest.approx(
        law.upper_tail_ratio(3.0), rel=1e-12)


def test_second_moment_gaussian():
    assert limit_laws.gaussian(2.0).moment(2) == pytest.approx(2.0, rel=1e-9)
    assert limit_laws.gaussian(2.0).moment(3) == 0.0


def test_moment_normalized_hits_target_moment():
    law = limit_laws.moment_normalized(3, 20.0)
    assert law.moment(6) == pytest.approx(20.0, rel=1e-8)


def test_canonical_power_parameters():
    assert limit_laws.gaussian(2.0).canonical_power == pytest.approx((1, 0.25))
    assert limit_laws.critical_classic().canonical_power == \
        pytest.approx((2, 1.0 / 12.0))
    k, a = limit_laws.power(3, 6.0).canonical_power
    assert k == 3
    assert a == pytest.approx(6.0 / math.factorial(6), rel=1e-12)
    assert limit_laws.f_gamma(1.0).canonical_power is None


def test_sampling_deterministic_and_calibrated():
    law = limit_laws.critical_classic()
    a = law.sample(20_000, seed=42)
    b = law.sample(20_000, seed=42)
    assert np.array_equal(a, b)
    c = law.sample(20_000, seed=43)
    assert not np.array_equal(a, c)
    m2 = law.moment(2)
    assert np.mean(a**2) == pytest.approx(m2, abs=4 * np.std(a**2) / 141.0)
    assert abs(np.mean(a)) < 4 * np.std(a) / 141.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 4.0))
def test_cdf_monotone(step):
    law = limit_laws.power(2, 2.0)
    x = np.arange(-5.0, 5.0, step)
    f = np.asarray(law.cdf(x))
    assert np.all(np.diff(f) >= -1e-12)


def test_build_law_round_trip():
    for law in FAMILIES:
        again = limit_laws.build_law(law.to_descriptor())
        assert again.family == law.family
        assert again.params == law.params


def test_invalid_parameters_rejected():
    with pytest.raises((limit_laws.LawError, KeyError, ValueError)):
        limit_laws.gaussian(-1.0).Z
    with pytest.raises((limit_laws.LawError, ValueError)):
        limit_laws.build_law({"family": "nope"})
