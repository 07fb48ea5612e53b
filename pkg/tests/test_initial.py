import numpy as np
import pytest

from spdeclt import GridSpec
from spdeclt.errors import ConfigError, ValidationError
from spdeclt.grid import build_axes
from spdeclt.initial import (InitialCondition, cdf_table, check_distribution_path, density_gaussian,
                             heaviside, validate_initial)

SPEC = GridSpec(-4.0, 4.0, 81, 1.0, 10, -1.0, 2.0, 10)
Y = build_axes(SPEC)[0]


def test_heaviside_half_value_and_sbm_shift():
    F = heaviside(1.0).values(SPEC, "sbm")
    assert F[Y == 1.0][0] == 0.5 and F[0] == 0.0 and F[-1] == 1.0
    G = heaviside(-1.0).values(SPEC, "sbm")
    assert G[-1] == 0.0 and G[0] == -1.0 and G[Y == 0.0][0] == 0.0
    assert np.array_equal(heaviside(-1.0).values(SPEC, "fvp"), G + 1.0)
    validate_initial(F, SPEC, "sbm")
    validate_initial(G, SPEC, "sbm")


def test_gaussian_density_and_limits():
    ic = density_gaussian(0.5, 0.2, 2.0)
    F = ic.values(SPEC, "sbm")
    assert F[Y == 0.0][0] == pytest.approx(0.0, abs=1e-15)
    assert F[-1] - F[0] == pytest.approx(2.0, abs=1e-12)
    assert ic.limit(0.5, 0.0, "fvp") == pytest.approx(1.0)
    assert ic.limit(0.5, 1.0, "fvp") == pytest.approx(1.0)
    assert heaviside(0.0).limit(1.0, 1.0, "fvp") == pytest.approx(0.8413447460685429)


def test_table_interpolation_and_roundtrip():
    ic = cdf_table([[-1, 0], [0, 0.25], [1, 1]])
    assert ic.evaluate(np.array([-2, -0.5, 0.5, 3])).tolist() == [0.0, 0.125, 0.625, 1.0]
    for x in (ic, heaviside(0.3), density_gaussian(0, 1, 1), InitialCondition("zero")):
        assert InitialCondition.from_dict(x.to_dict()) == x
    with pytest.raises(ValueError):
        ic.limit(0.0, 1.0)


@pytest.mark.parametrize("F,kind", [
    (-np.linspace(0, 1, 81), "sbm"),
    (np.linspace(0, 1, 81), "sbm"),
    (np.linspace(0, 0.9, 81), "fvp"),
    (np.full(81, np.nan), "sbm"),
    (np.zeros(80), "sbm"),
])
def test_invalid_initial_data(F, kind):
    with pytest.raises(ConfigError):
        validate_initial(F, SPEC, kind)


def test_bad_parameters():
    with pytest.raises(ConfigError):
        density_gaussian(0, 0)
    with pytest.raises(ConfigError):
        cdf_table([[1, 0], [0, 1]])
    with pytest.raises(ConfigError):
        InitialCondition("dirac")
    check_distribution_path(np.array([[0, 1, 2.0]]))
    with pytest.raises(ValidationError):
        check_distribution_path(np.array([[0, 1, 0.5]]))
