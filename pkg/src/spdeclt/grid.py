"""Uniform space / time / noise-axis discretization."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class GridSpec:
    """Joint discretization of the spatial axis y, time t and noise axis a.

    ``n_y`` counts spatial nodes including both endpoints, ``n_t`` counts time
    steps (so there are ``n_t + 1`` time nodes) and ``n_a`` counts noise cells.
    A zero horizon (``t_max == 0`` together with ``n_t == 0``) is allowed and
    describes a grid holding only the initial snapshot.
    """

    y_min: float
    y_max: float
    n_y: int
    t_max: float
    n_t: int
    a_min: float
    a_max: float
    n_a: int

    def __post_init__(self):
        validate(self)

    @property
    def dy(self) -> float:
        return (self.y_max - self.y_min) / (self.n_y - 1)

    @property
    def dt(self) -> float:
        return self.t_max / self.n_t if self.n_t else 0.0

    @property
    def da(self) -> float:
        return (self.a_max - self.a_min) / self.n_a

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        try:
            return cls(
                y_min=float(d["y_min"]), y_max=float(d["y_max"]), n_y=int(d["n_y"]),
                t_max=float(d["t_max"]), n_t=int(d["n_t"]),
                a_min=float(d["a_min"]), a_max=float(d["a_max"]), n_a=int(d["n_a"]),
            )
        except KeyError as exc:
            raise ConfigError("missing grid entry", field=str(exc.args[0])) from None

    def time_index(self, t: float) -> int:
        """Index of the grid time nearest to ``t``."""
        if self.n_t == 0:
            return 0
        return int(np.clip(round(t / self.dt), 0, self.n_t))


def validate(spec: GridSpec) -> None:
    if not np.isfinite([spec.y_min, spec.y_max, spec.t_max, spec.a_min, spec.a_max]).all():
        raise ConfigError("grid bounds must be finite", field="grid")
    if not spec.y_min < spec.y_max:
        raise ConfigError("y_min must be < y_max", field="y_max")
    if not spec.a_min < spec.a_max:
        raise ConfigError("a_min must be < a_max", field="a_max")
    if int(spec.n_y) != spec.n_y or spec.n_y < 3:
        raise ConfigError("need at least 3 spatial nodes", field="n_y")
    if int(spec.n_a) != spec.n_a or spec.n_a < 1:
        raise ConfigError("need at least 1 noise cell", field="n_a")
    if int(spec.n_t) != spec.n_t or spec.n_t < 0:
        raise ConfigError("time step count must be a non-negative integer", field="n_t")
    if spec.t_max < 0:
        raise ConfigError("time horizon must be non-negative", field="t_max")
    if (spec.t_max == 0) != (spec.n_t == 0):
        raise ConfigError("t_max == 0 exactly when n_t == 0", field="n_t")


def build_axes(spec: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (y nodes, t nodes, a-cell midpoints).

    >>> y, t, a = build_axes(GridSpec(0, 1, 3, 1, 2, 0, 1, 2))
    >>> y.tolist(), t.tolist(), a.tolist()
    ([0.0, 0.5, 1.0], [0.0, 0.5, 1.0], [0.25, 0.75])
    """
    validate(spec)
    y = spec.y_min + np.arange(spec.n_y) * spec.dy
    y[-1] = spec.y_max
    t = np.arange(spec.n_t + 1) * spec.dt
    if spec.n_t:
        t[-1] = spec.t_max
    a = spec.a_min + (np.arange(spec.n_a) + 0.5) * spec.da
    return y, t, a


def trapezoid_weights(spec: GridSpec) -> np.ndarray:
    validate(spec)
    w = np.full(spec.n_y, spec.dy)
    w[0] = w[-1] = 0.5 * spec.dy
    return w
