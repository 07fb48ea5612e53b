"""Smooth test functions and their pairings with grid fields.

Three families are available:

* ``gaussian_bump(c, w, A)``: ``A * exp(-(y - c)**2 / (2 w**2))``
* ``hermite_damped(k, c, w)``: ``He_k(x) * exp(-x**2 / 2)`` with ``x = (y - c) / w``
  and ``He_k`` the probabilists' Hermite polynomial of order 1, 2 or 3
* ``plateau(L, r, c=0)``: equal to 1 on ``|y - c| <= L``, 0 beyond ``L + r``,
  joined by a septic smoothstep ramp (C3). It is compactly supported, not
  rapidly decreasing, and only stands in for the constant function when
  measuring total mass.

Derivatives are closed-form. For the Gaussian families the identity
``d/dx [He_k(x) e^{-x^2/2}] = -He_{k+1}(x) e^{-x^2/2}`` gives every order directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import hermite_e

from .errors import ConfigError, ShapeError
from .grid import GridSpec, build_axes, trapezoid_weights

KINDS = ("gaussian_bump", "hermite_damped", "plateau")


@dataclass(frozen=True)
class TestFunction:
    kind: str
    params: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        _check(self)

    def __hash__(self):
        return hash((self.kind, tuple(sorted(self.params.items()))))

    def __call__(self, y, order: int = 0):
        return evaluate(self, y, order)

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_dict(cls, d: dict) -> "TestFunction":
        d = dict(d)
        kind = d.pop("kind", None)
        if kind == "gaussian_bump":
            return gaussian_bump(d.get("c", 0.0), d.get("w", 1.0), d.get("A", 1.0))
        if kind == "hermite_damped":
            return hermite_damped(d.get("k", 1), d.get("c", 0.0), d.get("w", 1.0))
        if kind == "plateau":
            return plateau(d["L"], d["r"], d.get("c", 0.0))
        raise ConfigError(f"unknown test function kind {kind!r}", field="test_functions")

    def label(self) -> str:
        inner = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}({inner})"


def gaussian_bump(c: float = 0.0, w: float = 1.0, A: float = 1.0) -> TestFunction:
    return TestFunction("gaussian_bump", {"c": float(c), "w": float(w), "A": float(A)})


def hermite_damped(k: int, c: float = 0.0, w: float = 1.0) -> TestFunction:
    return TestFunction("hermite_damped", {"k": int(k), "c": float(c), "w": float(w)})


def plateau(L: float, r: float, c: float = 0.0) -> TestFunction:
    return TestFunction("plateau", {"L": float(L), "r": float(r), "c": float(c)})


def _check(f: TestFunction) -> None:
    p = f.params
    if f.kind not in KINDS:
        raise ConfigError(f"unknown test function kind {f.kind!r}", field="kind")
    if f.kind in ("gaussian_bump", "hermite_damped") and not p["w"] > 0:
        raise ConfigError("width must be positive", field="w")
    if f.kind == "hermite_damped" and p["k"] not in (1, 2, 3):
        raise ConfigError("Hermite order must be 1, 2 or 3", field="k")
    if f.kind == "plateau" and not (p["r"] > 0 and p["L"] >= 0):
        raise ConfigError("plateau needs L >= 0 and r > 0", field="r")


def _hermite_family(x, degree, w, order, amp):
    coef = np.zeros(degree + order + 1)
    coef[-1] = 1.0
    return amp * (-1.0 / w) ** order * hermite_e.hermeval(x, coef) * np.exp(-0.5 * x * x)


def evaluate(f: TestFunction, y, order: int = 0):
    """f(y), f'(y) or f''(y) from closed-form expressions."""
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    y = np.asarray(y, dtype=float)
    p = f.params
    if f.kind == "gaussian_bump":
        x = (y - p["c"]) / p["w"]
        return _hermite_family(x, 0, p["w"], order, p["A"])
    if f.kind == "hermite_damped":
        x = (y - p["c"]) / p["w"]
        return _hermite_family(x, p["k"], p["w"], order, 1.0)

    # plateau: 1 - S(tau) on the ramp, S the C3 smoothstep 35t^4 - 84t^5 + 70t^6 - 20t^7
    d = y - p["c"]
    tau = np.clip((np.abs(d) - p["L"]) / p["r"], 0.0, 1.0)
    if order == 0:
        return 1.0 - tau**4 * (35.0 + tau * (-84.0 + tau * (70.0 - 20.0 * tau)))
    if order == 1:
        return -np.sign(d) * 140.0 * (tau * (1.0 - tau)) ** 3 / p["r"]
    return -420.0 * (tau * (1.0 - tau)) ** 2 * (1.0 - 2.0 * tau) / p["r"] ** 2


def _field(values, spec: GridSpec) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (spec.n_y,):
        raise ShapeError(f"field has shape {values.shape}, grid needs ({spec.n_y},)")
    return values


def pair(values, f: TestFunction, spec: GridSpec, order: int = 0) -> float:
    """Trapezoid pairing sum_j w_j * field_j * f^(order)(y_j)."""
    values = _field(values, spec)
    y = build_axes(spec)[0]
    return float(np.sum(trapezoid_weights(spec) * values * evaluate(f, y, order)))


def measure_pair(values, f: TestFunction, spec: GridSpec) -> float:
    """Pairing of the measure whose distribution function is ``values``.

    Integration by parts turns <mu, f> into -<u, f'>.
    """
    return -pair(values, f, spec, order=1)


def pairing_vector(f: TestFunction, spec: GridSpec, mode: str = "distribution") -> np.ndarray:
    """Weights v with ``v @ field`` equal to the pairing in the given mode."""
    y = build_axes(spec)[0]
    w = trapezoid_weights(spec)
    if mode == "distribution":
        return w * evaluate(f, y, 0)
    if mode == "measure":
        return -(w * evaluate(f, y, 1))
    raise ConfigError(f"unknown pairing mode {mode!r}", field="pairing")


def effective_values(f: TestFunction, spec: GridSpec, mode: str = "distribution") -> np.ndarray:
    """Grid values of the function actually integrated against the field (f or -f')."""
    y = build_axes(spec)[0]
    if mode == "distribution":
        return evaluate(f, y, 0)
    if mode == "measure":
        return -evaluate(f, y, 1)
    raise ConfigError(f"unknown pairing mode {mode!r}", field="pairing")
