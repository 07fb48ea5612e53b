"""Initial distribution functions F and their heat-flow closed forms.

The two models read F differently. For super-Brownian motion
``F(y) = mu_0([0, y])``, signed so that ``F(0) = 0``. For Fleming-Viot
``F(y) = mu_0((-inf, y])``, a distribution function running from 0 to 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .errors import ConfigError, ValidationError
from .grid import GridSpec, build_axes

KINDS = ("heaviside", "cdf_table", "density_gaussian", "zero")


def _step(x):
    """Heaviside with the midpoint value 1/2 at the jump."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, 1.0, np.where(x < 0, 0.0, 0.5))


@dataclass(frozen=True)
class InitialCondition:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown initial condition {self.kind!r}", field="initial_condition.kind")
        if self.kind == "density_gaussian" and not self.params.get("sd", 0) > 0:
            raise ConfigError("sd must be positive", field="initial_condition.sd")
        if self.kind == "cdf_table":
            pts = np.asarray(self.params.get("points", ()), dtype=float)
            if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
                raise ConfigError("points must be a list of [y, F] pairs", field="initial_condition.points")
            if np.any(np.diff(pts[:, 0]) <= 0):
                raise ConfigError("points must have increasing y", field="initial_condition.points")

    def __hash__(self):
        return hash((self.kind, repr(sorted(self.params.items()))))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "InitialCondition":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind == "cdf_table":
            d["points"] = tuple(tuple(float(v) for v in p) for p in d.get("points", ()))
        return cls(kind, d)

    def _shift(self, kernel_kind):
        """Value subtracted so that an sbm F vanishes at y = 0."""
        if kernel_kind != "sbm":
            return 0.0
        if self.kind == "heaviside":
            return float(_step(0.0 - self.params["x0"]))
        if self.kind == "density_gaussian":
            p = self.params
            return p.get("mass", 1.0) * float(ndtr((0.0 - p["mean"]) / p["sd"]))
        return 0.0

    def evaluate(self, y, kernel_kind: str = "sbm"):
        y = np.asarray(y, dtype=float)
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "heaviside":
            return _step(y - p["x0"]) - self._shift(kernel_kind)
        if self.kind == "density_gaussian":
            return p.get("mass", 1.0) * ndtr((y - p["mean"]) / p["sd"]) - self._shift(kernel_kind)
        pts = np.asarray(p["points"], dtype=float)
        return np.interp(y, pts[:, 0], pts[:, 1])

    def values(self, spec: GridSpec, kernel_kind: str = "sbm") -> np.ndarray:
        return self.evaluate(build_axes(spec)[0], kernel_kind)

    def has_closed_form(self) -> bool:
        return self.kind in ("heaviside", "density_gaussian", "zero")

    def limit(self, y, t: float, kernel_kind: str = "sbm"):
        """Heat flow P_t F on the whole line (heaviside, Gaussian or zero data only)."""
        y = np.asarray(y, dtype=float)
        if t == 0:
            return self.evaluate(y, kernel_kind)
        p = self.params
        if self.kind == "zero":
            return np.zeros_like(y)
        if self.kind == "heaviside":
            return ndtr((y - p["x0"]) / np.sqrt(t)) - self._shift(kernel_kind)
        if self.kind == "density_gaussian":
            s = np.sqrt(p["sd"] ** 2 + t)
            return p.get("mass", 1.0) * ndtr((y - p["mean"]) / s) - self._shift(kernel_kind)
        raise ValueError("no closed form for tabulated initial data")


def heaviside(x0: float) -> InitialCondition:
    return InitialCondition("heaviside", {"x0": float(x0)})


def density_gaussian(mean: float, sd: float, mass: float = 1.0) -> InitialCondition:
    return InitialCondition("density_gaussian", {"mean": float(mean), "sd": float(sd), "mass": float(mass)})


def cdf_table(points) -> InitialCondition:
    return InitialCondition("cdf_table", {"points": tuple(tuple(map(float, p)) for p in points)})


def validate_initial(F: np.ndarray, spec: GridSpec, kernel_kind: str, tol: float = 1e-10) -> None:
    """Reject initial data that no nonnegative measure (or probability) could produce."""
    F = np.asarray(F, dtype=float)
    if F.shape != (spec.n_y,):
        raise ConfigError(f"initial field has shape {F.shape}, need ({spec.n_y},)", field="initial_condition")
    if not np.all(np.isfinite(F)):
        raise ConfigError("initial field must be finite", field="initial_condition")
    if kernel_kind not in ("sbm", "fvp"):
        return
    if np.any(np.diff(F) < -tol):
        raise ConfigError("initial distribution function must be nondecreasing", field="initial_condition")
    y = build_axes(spec)[0]
    if kernel_kind == "sbm":
        if np.any(F[y < 0] > tol) or np.any(F[y > 0] < -tol):
            raise ConfigError("sbm initial data must satisfy F(0) = 0 (F <= 0 left of 0, >= 0 right of 0)",
                              field="initial_condition")
    else:
        if abs(F[0]) > 1e-8 or abs(F[-1] - 1.0) > 1e-8 or F.min() < -tol or F.max() > 1 + tol:
            raise ConfigError("fvp initial data must run from 0 to 1", field="initial_condition")


def check_distribution_path(snapshots: np.ndarray, tol: float = 1e-8) -> None:
    if np.any(np.diff(snapshots, axis=-1) < -tol):
        raise ValidationError("limit path is not nondecreasing in y")
