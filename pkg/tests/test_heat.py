import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdeclt import GridSpec, gaussian_bump
from spdeclt.errors import DomainError, ShapeError
from spdeclt.grid import build_axes, trapezoid_weights
from spdeclt.heat import NEUMANN, Dirichlet, HeatOperator, cn_step, heat_kernel, semigroup_apply, solve_limit
from spdeclt.initial import heaviside
from spdeclt.testfn import evaluate


def test_heat_kernel_values():
    assert heat_kernel(1.0, 0.0) == pytest.approx(0.3989422804014327, abs=1e-15)
    x = np.random.default_rng(1).normal(size=50) * 3
    assert np.array_equal(heat_kernel(0.7, x), heat_kernel(0.7, -x))
    xs = np.linspace(-10, 10, 200_001)
    assert abs(np.trapezoid(heat_kernel(0.5, xs), xs) - 1.0) < 1e-8
    for t in (0.0, -1.0):
        with pytest.raises(DomainError):
            heat_kernel(t, 0.0)


SPEC = GridSpec(-10.0, 10.0, 801, 1.0, 10, 0.0, 1.0, 1)
Y = build_axes(SPEC)[0]


def test_semigroup_identity_and_gaussian_closed_form():
    f = evaluate(gaussian_bump(0, 0.8, 1), Y)
    assert np.array_equal(semigroup_apply(0.0, f, SPEC), f)
    for t in (0.3, 1.0, 2.5):
        peak = semigroup_apply(t, f, SPEC)[400]
        assert abs(peak - 0.8 / math.sqrt(0.64 + t)) < 1e-4
    with pytest.raises(ShapeError):
        semigroup_apply(0.1, f[:-1], SPEC)


def test_semigroup_preserves_constants_inside():
    out = semigroup_apply(0.5, np.ones(SPEC.n_y), SPEC)
    assert np.max(np.abs(out[np.abs(Y) < 4] - 1.0)) < 1e-6


@pytest.mark.parametrize("t", [1e-6, 1e-5, 1e-4, 4e-4])
def test_semigroup_small_times_tend_to_identity(t):
    # below the grid scale the interpolant's kinks cost about |f''| dy sqrt(t)
    f = evaluate(gaussian_bump(0.3, 0.7, 1), Y)
    exact = 0.7 / math.sqrt(0.49 + t) * np.exp(-(Y - 0.3) ** 2 / (2 * (0.49 + t)))
    bound = 0.5 * (1 / 0.49) * SPEC.dy * math.sqrt(t)
    assert np.max(np.abs(semigroup_apply(t, f, SPEC) - exact)) < bound


def test_semigroup_property_and_self_adjointness():
    f = evaluate(gaussian_bump(0.5, 0.6, 1), Y)
    g = evaluate(gaussian_bump(-1.0, 1.1, 1), Y)
    two = semigroup_apply(0.2, semigroup_apply(0.3, f, SPEC), SPEC)
    assert np.max(np.abs(two - semigroup_apply(0.5, f, SPEC))) < 1e-4
    w = trapezoid_weights(SPEC)
    for t in (0.01, 0.5):
        lhs = np.sum(w * semigroup_apply(t, f, SPEC) * g)
        rhs = np.sum(w * f * semigroup_apply(t, g, SPEC))
        assert abs(lhs - rhs) < 1e-6


def test_cn_step_constants_and_affine_fields():
    op = HeatOperator(SPEC, NEUMANN)
    assert np.max(np.abs(cn_step(op, np.full(SPEC.n_y, 3.7)) - 3.7)) < 1e-12
    # zero flux bends the line at the ends; with rho = 0.4 that stays local
    spec = GridSpec(-10.0, 10.0, 801, 1.0, 1000, 0.0, 1.0, 1)
    lin = 0.3 + 2.0 * build_axes(spec)[0]
    out = cn_step(HeatOperator(spec, NEUMANN), lin)
    assert np.max(np.abs(out[40:-40] - lin[40:-40])) < 1e-10


@pytest.mark.parametrize("k", [1, 3, 17])
def test_cn_sine_mode_amplification(k):
    spec = GridSpec(0.0, 2.0, 201, 0.1, 20, 0.0, 1.0, 1)
    y = build_axes(spec)[0]
    L, dy, dt = 2.0, spec.dy, spec.dt
    mode = np.sin(np.pi * k * y / L)
    beta = (dt / 4) * (2 - 2 * math.cos(math.pi * k * dy / L)) / dy**2
    out = cn_step(HeatOperator(spec, Dirichlet(0.0, 0.0)), mode)
    assert np.max(np.abs(out - (1 - beta) / (1 + beta) * mode)) < 1e-10


def test_limit_examples():
    spec = GridSpec(-5.0, 5.0, 1001, 1.0, 400, -1.0, 1.0, 1)
    F = heaviside(0.0).values(spec, "fvp")
    u0 = solve_limit(F, HeatOperator(spec, NEUMANN))
    assert np.array_equal(u0.snapshots[0], F)
    assert np.max(np.abs(u0.snapshots[:, 500] - 0.5)) < 1e-12
    zero = solve_limit(np.zeros(spec.n_y), HeatOperator(spec, NEUMANN))
    assert not np.any(zero.snapshots)


def test_limit_matches_normal_cdf():
    spec = GridSpec(-5.0, 6.0, 1101, 0.25, 2500, 0.0, 1.0, 1)
    ic = heaviside(0.5)
    times = build_axes(spec)[1]
    op = HeatOperator(spec, Dirichlet(lambda t: ic.limit(spec.y_min, t, "fvp"),
                                      lambda t: ic.limit(spec.y_max, t, "fvp")))
    u0 = solve_limit(ic.values(spec, "fvp"), op)
    err = np.max(np.abs(u0.snapshots[-1] - ic.limit(build_axes(spec)[0], times[-1], "fvp")))
    assert err <= 1e-3


def test_crank_nicolson_is_second_order():
    errs = []
    for n in (2, 4, 8):
        spec = GridSpec(-5.0, 6.0, 275 * n + 1, 1.0, 625 * n, 0.0, 1.0, 1)
        ic = heaviside(0.5)
        op = HeatOperator(spec, Dirichlet(lambda t: ic.limit(-5.0, t, "fvp"), lambda t: ic.limit(6.0, t, "fvp")))
        u0 = solve_limit(ic.values(spec, "fvp"), op)
        errs.append(np.max(np.abs(u0.snapshots[-1] - ic.limit(build_axes(spec)[0], 1.0, "fvp"))))
    slope = np.polyfit(np.log([1, 0.5, 0.25]), np.log(errs), 1)[0]
    assert 1.7 <= slope <= 2.3


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_neumann_conserves_trapezoid_mass(seed):
    spec = GridSpec(-3.0, 3.0, 121, 0.5, 50, 0.0, 1.0, 1)
    F = np.cumsum(np.random.default_rng(seed).random(spec.n_y))
    u0 = solve_limit(F, HeatOperator(spec, NEUMANN))
    mass = u0.snapshots @ trapezoid_weights(spec)
    assert np.max(np.abs(np.diff(mass))) < 1e-10 * max(1.0, abs(mass[0]))
