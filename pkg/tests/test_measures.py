import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwstein import measures


def test_bernoulli_basics():
    m = measures.construct_measure("bernoulli")
    assert m.variance == pytest.approx(1.0, abs=1e-12)
    assert m.essential_sup == 1.0
    assert measures.cgf(m, 0.7) == pytest.approx(math.log(math.cosh(0.7)),
                                                 abs=1e-12)


def test_asymmetric_atoms_rejected():
    with pytest.raises(measures.MeasureError):
        measures.SpinMeasure(kind="atomic", label="bad",
                             atoms=((-1.0, 0.25), (1.0, 0.75)))


def test_three_state_atoms():
    m = measures.construct_measure("three_state")
    xs, ws = m.atom_arrays()
    assert sorted(xs) == pytest.approx([-math.sqrt(3), 0.0, math.sqrt(3)])
    assert ws.sum() == pytest.approx(1.0, abs=1e-12)
    assert m.variance == pytest.approx(1.0, abs=1e-12)


def test_uniform_standardized():
    m = measures.construct_measure({"kind": "uniform",
                                    "half_width": math.sqrt(3.0)})
    assert m.variance == pytest.approx(1.0, abs=1e-10)


def test_cgf_derivative_matches_finite_difference():
    m = measures.construct_measure("three_state")
    h = 1e-5
    for s in (-1.3, 0.0, 0.4, 2.0):
        fd = (measures.cgf(m, s + h) - measures.cgf(m, s - h)) / (2 * h)
        assert measures.cgf_derivative(m, s, 1) == pytest.approx(fd, abs=1e-8)
        fd2 = (measures.cgf(m, s + h) - 2 * measures.cgf(m, s)
               + measures.cgf(m, s - h)) / h**2
        assert measures.cgf_derivative(m, s, 2) == pytest.approx(fd2, abs=1e-5)


def test_bernoulli_cgf_derivatives_closed_form():
    m = measures.construct_measure("bernoulli")
    for s in (-2.0, -0.1, 0.0, 0.9):
        assert measures.cgf_derivative(m, s, 1) == pytest.approx(
            math.tanh(s), abs=1e-10)
        assert measures.cgf_derivative(m, s, 2) == pytest.approx(
            1.0 / math.cosh(s) ** 2, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(-4.0, 4.0))
def test_cgf_even(s):
    m = measures.construct_measure("three_state")
    assert measures.cgf(m, s) == pytest.approx(measures.cgf(m, -s), abs=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3.0, 3.0))
def test_cgf_second_derivative_nonnegative(s):
    m = measures.construct_measure({"kind": "trinomial", "a": 0.6})
    assert measures.cgf_derivative(m, s, 2) >= -1e-12


def test_tilted_moments_zero_tilt():
    m = measures.construct_measure("bernoulli")
    mom = measures.tilted_raw_moments(m, 0.0, 4)
    assert mom[0] == pytest.approx(1.0)
    assert mom[1] == pytest.approx(0.0, abs=1e-14)
    assert mom[2] == pytest.approx(1.0)
    assert mom[4] == pytest.approx(1.0)


def test_standardize_unit_variance():
    raw = measures.SpinMeasure(kind="atomic", label="wide",
                               atoms=((-2.0, 0.5), (2.0, 0.5)))
    std = measures.standardize(raw)
    assert std.variance == pytest.approx(1.0, abs=1e-12)
    xs, _ = std.atom_arrays()
    assert sorted(xs) == pytest.approx([-1.0, 1.0])


def test_ghs_split_on_trinomial_weight():
    good = measures.check_ghs(
        measures.construct_measure({"kind": "trinomial", "a": 0.5}))
    bad = measures.check_ghs(
        measures.construct_measure({"kind": "trinomial", "a": 0.75}))
    assert good.holds
    assert not bad.holds
    assert bad.worst_value > 0


def test_gibbs_density_measure():
    m = measures.construct_measure(
        {"kind": "gibbs_density", "coefficients": {"2": 0.5, "4": 0.25}})
    assert m.kind == "continuous"
    assert measures.cgf(m, 0.0) == pytest.approx(0.0, abs=1e-10)
    # variance from the second cgf derivative at 0
    assert measures.cgf_derivative(m, 0.0, 2) == pytest.approx(
        m.variance, abs=1e-8)


def test_unknown_kind_rejected():
    with pytest.raises(measures.MeasureError):
        measures.construct_measure({"kind": "nope"})
