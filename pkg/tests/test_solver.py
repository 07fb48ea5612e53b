import math

import numpy as np
import pytest

from spdeclt import FVP, SBM, GridSpec, custom_table, gaussian_bump
from spdeclt.errors import ConfigError, ShapeError
from spdeclt.grid import build_axes
from spdeclt.heat import NEUMANN, Dirichlet, HeatOperator, cn_step, solve_limit
from spdeclt.initial import density_gaussian, heaviside
from spdeclt.kernel import eval_G
from spdeclt.noise import NoiseStream, increment_scale, standard_block
from spdeclt.solver import (
    PathFlags, centered_field, coupled_convergence, default_operator, noise_kick, pair_series,
    simulate_path, step_spde,
)

SBM_SPEC = GridSpec(-4.0, 6.0, 201, 0.5, 200, -0.25, 1.75, 40)
FVP_SPEC = GridSpec(-5.0, 6.0, 221, 0.5, 200, 0.0, 1.0, 40)


def sbm_F():
    return heaviside(1.0).values(SBM_SPEC, "sbm")


def fvp_F():
    return density_gaussian(0.5, 0.3).values(FVP_SPEC, "fvp")


def test_default_operator_boundaries():
    assert default_operator(SBM_SPEC, SBM).boundary == NEUMANN
    assert isinstance(default_operator(FVP_SPEC, FVP).boundary, Dirichlet)


@pytest.mark.parametrize("kernel", [SBM, FVP])
def test_noise_kick_matches_pointwise_sum(kernel):
    spec = SBM_SPEC if kernel is SBM else FVP_SPEC
    y, _, a_mid = build_axes(spec)
    u = sbm_F() if kernel is SBM else fvp_F()
    xi = np.random.default_rng(3).normal(size=spec.n_a) * increment_scale(spec)
    want = sum(eval_G(kernel, a, y, u) * x for a, x in zip(a_mid, xi))
    assert np.allclose(noise_kick(u, kernel, xi, spec), want, atol=1e-13)


def test_noise_kick_for_table_kernel():
    spec = GridSpec(-1.0, 1.0, 21, 1.0, 10, 0.0, 1.0, 4)
    tab = custom_table([0.0, 0.5, 1.0], [0.0], [[1.0, 2.0], [-1.0, 0.5]])
    u = np.linspace(-1, 1, 21)
    xi = np.array([1.0, 2.0, 3.0, 4.0])
    want = np.where(u < 0, 1.0 * 3 - 1.0 * 7, 2.0 * 3 + 0.5 * 7)
    assert np.allclose(noise_kick(u, tab, xi, spec), want)


def test_eps_zero_and_silent_stream_reproduce_the_limit_exactly():
    limit = solve_limit(sbm_F(), default_operator(SBM_SPEC, SBM))
    p0 = simulate_path(SBM_SPEC, SBM, 0.0, sbm_F(), NoiseStream(5, 0))
    quiet = simulate_path(SBM_SPEC, SBM, 0.3, sbm_F(), NoiseStream(5, 0, silent=True))
    assert np.array_equal(p0.snapshots, limit.snapshots)
    assert np.array_equal(quiet.snapshots, limit.snapshots)


def test_step_without_noise_is_a_heat_step():
    op = HeatOperator(SBM_SPEC, NEUMANN)
    u = sbm_F()
    assert np.array_equal(step_spde(u, SBM, 0.1, np.zeros(SBM_SPEC.n_a), op), cn_step(op, u))


def test_single_steps_rebuild_the_full_path():
    op = default_operator(SBM_SPEC, SBM)
    path = simulate_path(SBM_SPEC, SBM, 0.05, sbm_F(), NoiseStream(9, 2), op)
    u, flags = sbm_F(), PathFlags()
    stream = NoiseStream(9, 2)
    for n in range(SBM_SPEC.n_t):
        xi = stream.standard_at(n, SBM_SPEC.n_a) * increment_scale(SBM_SPEC)
        u = step_spde(u, SBM, 0.05, xi, op, flags, step=n)
    assert np.allclose(u, path.snapshots[-1], atol=1e-12)


def test_replicates_are_reproducible_and_distinct():
    a = simulate_path(SBM_SPEC, SBM, 0.05, sbm_F(), NoiseStream(1, 4))
    b = simulate_path(SBM_SPEC, SBM, 0.05, sbm_F(), NoiseStream(1, 4))
    c = simulate_path(SBM_SPEC, SBM, 0.05, sbm_F(), NoiseStream(1, 5))
    assert np.array_equal(a.snapshots, b.snapshots)
    assert not np.allclose(a.snapshots[-1], c.snapshots[-1])
    assert a.metadata()["replicate_index"] == 4


def test_noise_blocks_are_addressable_on_their_own():
    s = NoiseStream(2**64 + 7, 3)
    direct = standard_block(7, 3, 2, 5)
    assert np.array_equal(s.standard_at(2 * 64 + 11, 5), direct[11])


def test_prefix_of_a_longer_run_matches_a_shorter_run():
    short = GridSpec(-4.0, 6.0, 201, 0.25, 100, -0.25, 1.75, 40)
    p_long = simulate_path(SBM_SPEC, SBM, 0.05, sbm_F(), NoiseStream(1, 0))
    p_short = simulate_path(short, SBM, 0.05, sbm_F(), NoiseStream(1, 0))
    assert np.array_equal(p_long.snapshots[:101], p_short.snapshots)


def test_fvp_path_stays_a_distribution_function():
    path = simulate_path(FVP_SPEC, FVP, 0.02, fvp_F(), NoiseStream(3, 0))
    s = path.snapshots
    assert np.all(s[1:, 0] == 0.0) and np.all(s[1:, -1] == 1.0)
    assert s.min() >= 0.0 and s.max() <= 1.0
    assert path.flags.valid


def test_sbm_range_exit_is_flagged_not_raised():
    spec = GridSpec(-4.0, 6.0, 201, 0.5, 200, -0.3, 1.2, 30)
    path = simulate_path(spec, SBM, 0.5, heaviside(1.0).values(spec, "sbm"), NoiseStream(0, 0))
    assert path.flags.range_exit and path.flags.exit_step > 0
    assert not path.flags.valid
    inside = GridSpec(-4.0, 6.0, 201, 0.5, 200, -0.05, 0.3, 20)
    early = simulate_path(inside, SBM, 0.5, heaviside(1.0).values(inside, "sbm"), NoiseStream(0, 0))
    assert early.flags.exit_step == 0


def test_centering_and_pairing_modes():
    u0 = solve_limit(sbm_F(), default_operator(SBM_SPEC, SBM))
    ue = simulate_path(SBM_SPEC, SBM, 0.04, sbm_F(), NoiseStream(1, 0))
    z = centered_field(ue, u0, 0.04)
    assert z.centered
    assert np.allclose(z.snapshots, (ue.snapshots - u0.snapshots) / 0.2)
    f = gaussian_bump(1.0, 0.5)
    dist = pair_series(z, [f], [0, 100, 200], "distribution")
    meas = pair_series(z, [f], [0, 100, 200], "measure")
    assert dist.shape == (3, 1) and np.all(dist[0] == 0) and np.all(meas[0] == 0)
    with pytest.raises(ConfigError):
        pair_series(z, [f], [1], "weak")
    with pytest.raises(IndexError):
        pair_series(z, [f], [201])
    with pytest.raises(ConfigError):
        centered_field(ue, u0, 0.0)


def test_coupled_convergence_reference_is_zero():
    d = coupled_convergence(SBM_SPEC, SBM, sbm_F(), [0.1, 0.01, 0.001], NoiseStream(4, 0),
                            gaussian_bump(1.0, 0.5), 200)
    assert len(d) == 3 and d[-1] == 0.0
    with pytest.raises(ConfigError):
        coupled_convergence(SBM_SPEC, SBM, sbm_F(), [0.01, 0.1], NoiseStream(4, 0),
                            gaussian_bump(), 10)


def test_input_checks():
    with pytest.raises(ConfigError):
        simulate_path(SBM_SPEC, SBM, -1.0, sbm_F(), NoiseStream(0))
    with pytest.raises(ConfigError):
        simulate_path(SBM_SPEC, SBM, math.nan, sbm_F(), NoiseStream(0))
    with pytest.raises(ConfigError):
        simulate_path(SBM_SPEC, SBM, 0.1, np.full(SBM_SPEC.n_y, 0.5), NoiseStream(0))
    with pytest.raises(ShapeError):
        step_spde(sbm_F()[:-1], SBM, 0.1, np.zeros(SBM_SPEC.n_a), default_operator(SBM_SPEC, SBM))
    with pytest.raises(ConfigError):
        simulate_path(FVP_SPEC, FVP, 0.1, sbm_F()[:1].repeat(FVP_SPEC.n_y), NoiseStream(0))
