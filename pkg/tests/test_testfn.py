import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from spdeclt import GridSpec, gaussian_bump, hermite_damped, plateau
from spdeclt.errors import ConfigError, ShapeError
from spdeclt.grid import build_axes
from spdeclt.testfn import TestFunction, evaluate, measure_pair, pair, pairing_vector

WIDE = GridSpec(-12.0, 12.0, 4801, 1.0, 1, 0.0, 1.0, 1)
UNIT = GridSpec(0.0, 1.0, 101, 1.0, 1, 0.0, 1.0, 1)

# int exp(-y^2) dy over the line, from scipy.integrate.quad
BUMP_SQUARED_INTEGRAL = 1.7724538509055159


def test_point_values():
    f = gaussian_bump(0, 1, 1)
    assert evaluate(f, 0.0) == 1.0
    assert evaluate(f, 0.0, 1) == 0.0
    p = plateau(2, 1)
    assert evaluate(p, 0.0) == 1.0 and evaluate(p, 3.5) == 0.0
    assert evaluate(p, 2.0) == 1.0 and evaluate(p, 3.0) == 0.0


def test_bump_derivative_matches_central_difference():
    f, h = gaussian_bump(0, 1, 1), 1e-5
    fd = (evaluate(f, 0.7 + h) - evaluate(f, 0.7 - h)) / (2 * h)
    assert abs(evaluate(f, 0.7, 1) - fd) < 1e-6


fn_strategy = st.one_of(
    st.builds(gaussian_bump, st.floats(-3, 3), st.floats(0.3, 3), st.floats(-2, 2)),
    st.builds(hermite_damped, st.sampled_from([1, 2, 3]), st.floats(-3, 3), st.floats(0.3, 3)),
    st.builds(plateau, st.floats(0, 4), st.floats(0.3, 3), st.floats(-2, 2)),
)


@settings(max_examples=60, deadline=None)
@given(f=fn_strategy)
def test_derivatives_consistent_with_finite_differences(f):
    y = np.linspace(-10, 10, 801)
    h = 1e-6
    for order in (1, 2):
        fd = (evaluate(f, y + h, order - 1) - evaluate(f, y - h, order - 1)) / (2 * h)
        assert np.max(np.abs(evaluate(f, y, order) - fd)) < 1e-6


def test_plateau_is_flat_then_zero_and_c2():
    p = plateau(1.5, 0.7, c=0.4)
    y = np.linspace(-5, 5, 2001)
    v = evaluate(p, y)
    assert np.all(v[np.abs(y - 0.4) <= 1.5] == 1.0)
    assert np.all(v[np.abs(y - 0.4) >= 2.2] == 0.0)
    for k in (1, 2):
        edges = evaluate(p, np.array([0.4 - 2.2, 0.4 - 1.5, 0.4 + 1.5, 0.4 + 2.2]), k)
        assert np.allclose(edges, 0.0, atol=1e-12)


def test_pairings():
    assert pair(np.zeros(UNIT.n_y), gaussian_bump(), UNIT) == 0.0
    assert abs(pair(np.ones(UNIT.n_y), plateau(1.0, 0.5, 0.5), UNIT) - 1.0) < 1e-12
    f = gaussian_bump(0, 1, 1)
    vals = evaluate(f, build_axes(WIDE)[0])
    oracle = integrate.quad(lambda x: math.exp(-x * x), -np.inf, np.inf)[0]
    assert oracle == pytest.approx(BUMP_SQUARED_INTEGRAL, abs=1e-12)
    assert abs(pair(vals, f, WIDE) - BUMP_SQUARED_INTEGRAL) < 1e-4
    with pytest.raises(ShapeError):
        pair(np.zeros(5), f, UNIT)


def test_measure_pairing():
    spec = GridSpec(-6.0, 6.0, 1201, 1.0, 1, 0.0, 1.0, 1)
    y = build_axes(spec)[0]
    assert measure_pair(np.zeros(spec.n_y), gaussian_bump(), spec) == 0.0
    # a centered field that is flat where the plateau ramps, so f' sees nothing
    z = np.exp(-y**2)
    assert abs(measure_pair(z, plateau(5.0, 0.9), spec)) < 1e-12
    # a step profile: the measure pairing with a covering plateau is its total mass
    step = 0.5 * (1 + np.vectorize(math.erf)(y / math.sqrt(2 * 0.3)))
    assert measure_pair(step, plateau(4.0, 1.0), spec) == pytest.approx(1.0, abs=1e-6)
    # symmetric ramps against a field equal on both sides cancel
    assert abs(measure_pair(np.ones(spec.n_y), plateau(4.0, 1.0), spec)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), f=fn_strategy, g=fn_strategy, alpha=st.floats(-3, 3))
def test_bilinearity_and_definitional_identity(seed, f, g, alpha):
    rng = np.random.default_rng(seed)
    u, v = rng.normal(size=UNIT.n_y), rng.normal(size=UNIT.n_y)
    lhs = pair(alpha * u + v, f, UNIT)
    assert lhs == pytest.approx(alpha * pair(u, f, UNIT) + pair(v, f, UNIT), rel=1e-12, abs=1e-12)
    y = build_axes(UNIT)[0]
    w = pairing_vector(f, UNIT) + pairing_vector(g, UNIT)
    assert w @ u == pytest.approx(np.sum(UNIT.dy * np.r_[0.5, np.ones(99), 0.5] * u * (evaluate(f, y) + evaluate(g, y))), rel=1e-10, abs=1e-12)
    assert measure_pair(u, f, UNIT) + pair(u, f, UNIT, order=1) == 0.0


def test_validation_and_roundtrip():
    with pytest.raises(ConfigError):
        gaussian_bump(w=0)
    with pytest.raises(ConfigError):
        hermite_damped(4)
    with pytest.raises(ConfigError):
        plateau(1, 0)
    for f in (gaussian_bump(1, 2, 3), hermite_damped(2, 0.5, 1.5), plateau(2, 1, 0.5)):
        assert TestFunction.from_dict(f.to_dict()) == f
        assert hash(TestFunction.from_dict(f.to_dict())) == hash(f)
