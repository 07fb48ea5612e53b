import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spdeclt import FVP, SBM, GridSpec, custom_table
from spdeclt.errors import ConfigError, DomainError
from spdeclt.kernel import (check_con1, check_con2, condition_report, default_probes, eval_G,
                            kernel_on_grid, validate_for_grid)


def test_pointwise_values():
    assert eval_G(SBM, 0.2, 0.0, 0.5) == 1.0
    assert eval_G(SBM, -0.3, 0.0, -0.1) == 0.0
    assert eval_G(SBM, -0.3, 0.0, -0.5) == 1.0
    assert eval_G(FVP, 0.4, 0.0, 0.7) == pytest.approx(0.3)
    assert eval_G(FVP, 0.9, 0.0, 0.7) == pytest.approx(-0.7)
    with pytest.raises(DomainError):
        eval_G(FVP, 1.2, 0.0, 0.5)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-3, 3), u=st.floats(-3, 3), y=st.floats(-5, 5))
def test_sbm_mirror_symmetry(a, u, y):
    assert eval_G(SBM, -a, y, -u) == eval_G(SBM, a, 0.0, u)


def test_increment_examples():
    assert check_con1(SBM, 0.3, 0.7)[0] == pytest.approx(0.4, abs=1e-15)
    assert check_con1(FVP, 0.3, 0.7)[0] == pytest.approx(0.24, abs=1e-15)
    for k in (SBM, FVP):
        lhs, ratio = check_con1(k, 0.4, 0.4)
        assert lhs == 0.0 and np.isnan(ratio)


def test_growth_examples():
    lhs, bound = check_con2(SBM, 2.0)
    assert lhs == 2.0 and bound == 5.0
    assert check_con2(FVP, 0.5)[0] == 0.25
    assert check_con2(FVP, 0.0)[0] == 0.0
    assert check_con2(FVP, 0.0, method="quadrature")[0] == 0.0


def test_quadrature_agrees_with_closed_forms():
    n = 10_000
    for k in (SBM, FVP):
        for u1 in default_probes(k)[::3]:
            for u2 in default_probes(k)[1::4]:
                a, _ = check_con1(k, u1, u2, method="analytic")
                q, _ = check_con1(k, u1, u2, n, method="quadrature")
                da = 2 * (max(abs(u1), abs(u2)) + 1) / n if k is SBM else 1.0 / n
                assert abs(a - q) <= 2 * da


@settings(max_examples=100, deadline=None)
@given(u1=st.floats(0, 1), u2=st.floats(0, 1))
def test_fvp_increment_identity(u1, u2):
    lhs = check_con1(FVP, u1, u2)[0]
    assert lhs == pytest.approx(abs(u1 - u2) - (u1 - u2) ** 2, abs=1e-12)
    assert lhs <= abs(u1 - u2) + 1e-15


def test_growth_quadrature_first_order():
    errs = [abs(check_con2(SBM, 0.737, n, method="quadrature")[0] - 0.737) for n in (100, 1000, 10_000)]
    slope = np.polyfit(np.log([100, 1000, 10_000]), np.log(errs), 1)[0]
    assert -1.3 < slope < -0.7


def test_condition_reports_pass_with_unit_constant():
    for k in (SBM, FVP):
        rows = condition_report(k)
        assert all(r["pass"] for r in rows)
        assert max(r["implied_K"] for r in rows) <= 1 + 1e-9


def test_table_kernel_and_violation():
    # constant in u: additive noise with a-dependent intensity
    edges = [0, 0.25, 0.5, 0.75, 1.0]
    good = custom_table(edges, [0.0], [[0.2, 0.2], [0.9, 0.9], [-0.5, -0.5], [0.0, 0.0]])
    assert all(r["pass"] for r in condition_report(good, n_quad=400))
    loud = custom_table([0, 1], [0.0], [[5.0, 5.0]])
    assert not all(r["pass"] for r in condition_report(loud, n_quad=400) if r["condition"] == "growth")
    # any jump in u breaks the increment bound for probes straddling it
    jump = custom_table([0, 1], [0.0], [[0.0, 0.2]])
    rows = condition_report(jump, n_quad=400)
    assert all(r["pass"] for r in rows if r["condition"] == "growth")
    assert not all(r["pass"] for r in rows if r["condition"] == "increment")
    spec = GridSpec(0, 1, 5, 1, 1, 0, 1, 8)
    tab = kernel_on_grid(good, spec)
    assert tab.shape == (8, 2)
    assert np.array_equal(tab, eval_G(good, (np.arange(8) + 0.5)[:, None] / 8, 0.0, np.array([[-1.0, 1.0]])))


def test_axis_requirements():
    validate_for_grid(FVP, GridSpec(0, 1, 5, 1, 1, 0, 1, 8))
    with pytest.raises(ConfigError):
        validate_for_grid(FVP, GridSpec(0, 1, 5, 1, 1, -0.1, 1, 8))
    with pytest.raises(ConfigError):
        validate_for_grid(SBM, GridSpec(0, 1, 5, 1, 1, 0.1, 1, 8))
