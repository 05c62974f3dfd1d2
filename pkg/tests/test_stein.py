import math

import numpy as np
import pytest

from cwstein import limit_laws, stein

LAWS = [limit_laws.gaussian(1.0), limit_laws.critical_classic(),
        limit_laws.power(3, 6.0)]


def test_indicator_solution_gaussian_at_origin():
    law = limit_laws.gaussian(1.0)
    assert stein.solve_indicator(law, 0.0, 0.0) == pytest.approx(
        math.sqrt(2.0 * math.pi) / 4.0, rel=1e-10)


def test_indicator_solution_positive_and_bounded():
    for law in LAWS:
        grid = stein.SteinGrid(law, np.linspace(-8, 8, 801))
        for iz in (100, 400, 700):
            f = grid.f_z(iz)
            assert np.all(f >= 0)
            assert np.all(np.isfinite(f))
            # both closed-form branches agree at x = z
            left = math.exp(grid.log_sf[iz] + grid.log_cdf[iz]
                            - grid.log_p[iz])
            assert f[iz] == pytest.approx(left, rel=1e-12)


def test_indicator_residual_via_finite_differences():
    law = limit_laws.critical_classic()
    z, h = -0.4, 1e-5
    p_z = float(law.cdf(z))
    for x in (-1.7, 0.2, 1.3):
        fd = (stein.solve_indicator(law, z, x + h)
              - stein.solve_indicator(law, z, x - h)) / (2 * h)
        rhs = (-float(law.psi(x)) * stein.solve_indicator(law, z, x)
               + (1.0 if x <= z else 0.0) - p_z)
        assert fd == pytest.approx(rhs, abs=1e-9)


def test_derivative_formulas_consistent():
    law = limit_laws.power(3, 6.0)
    x = np.linspace(-6, 6, 1201)
    grid = stein.SteinGrid(law, x)
    iz = 500
    f = grid.f_z(iz)
    fp = grid.f_z_prime(iz, f)
    pf = grid.psi_f_prime(iz, f)
    # away from the kink at z, (psi f)' = psi' f + psi f'
    away = np.abs(x - x[iz]) > 0.05
    direct = grid.psi_prime * f + grid.psi * fp
    assert np.max(np.abs((pf - direct)[away])) < 1e-9
    assert np.all(np.isfinite(pf))


def test_smooth_solution_linear_h_is_constant():
    # for h(x) = x on the standard gaussian, f_h = -1 identically
    law = limit_laws.gaussian(1.0)
    h = stein.SmoothTestFunction("id", lambda x: np.asarray(x, dtype=float),
                                 1.0)
    for x in (-1.0, 0.0, 2.5):
        assert stein.solve_smooth(law, h, x) == pytest.approx(-1.0, abs=1e-8)


def test_expectation_odd_function_vanishes():
    law = limit_laws.critical_classic()
    assert stein.expectation(law, lambda t: t**3) == pytest.approx(0.0,
                                                                   abs=1e-10)


def test_bound_constants_ordering():
    law = limit_laws.gaussian(1.0)
    rep = stein.estimate_bound_constants(
        law, z_grid=np.linspace(-3, 3, 61), x_grid=np.linspace(-6, 6, 601))
    assert 0 < rep.d1 <= math.sqrt(2 * math.pi) / 4 + 1e-6
    assert rep.d2 <= 1 + 1e-6
    assert rep.d3 <= 1 + 1e-6
    assert rep.d4 > 0
    assert rep.c1 > 0 and rep.c2 > 0 and rep.c3 > 0
    assert rep.per_z.shape == (61, 5)


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.family)
def test_tail_sandwich(law):
    for x in (0.3, 1.0, 2.5, 6.0, 12.0):
        rep = stein.check_tail_sandwich(law, x)
        assert rep.holds
        assert rep.lower <= rep.upper


def test_tail_sandwich_requires_pure_power():
    with pytest.raises(limit_laws.LawError):
        stein.check_tail_sandwich(limit_laws.f_gamma(1.0), 1.0)


def test_limit_product_deviation_shrinks_with_x():
    law = limit_laws.power(3, 6.0)
    d8 = stein.ungl4_deviation(law, 0.5, 8.0)
    d16 = stein.ungl4_deviation(law, 0.5, 16.0)
    assert max(abs(v) for v in d16) < max(abs(v) for v in d8)
    # the finite-x correction is of order x^(-2k)
    assert max(abs(v) for v in d8) < 1e-3
