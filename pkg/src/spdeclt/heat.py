"""Heat kernel, Brownian semigroup on the grid and Crank-Nicolson diffusion."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import signal
from scipy.special import ndtr

from . import _engine
from .errors import DomainError, ShapeError
from .fieldpath import FieldPath
from .grid import GridSpec, build_axes, trapezoid_weights

_SQRT_2PI = math.sqrt(2.0 * math.pi)

BoundaryValue = Union[float, Callable[[float], float]]


def heat_kernel(t: float, x):
    """p_t(x) = (2 pi t)^(-1/2) exp(-x^2 / 2t)."""
    if not t > 0:
        raise DomainError("heat kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)


def _normal_pdf(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def _hat_response(t, dy, offsets):
    """Heat flow at offset m*dy of the left and right halves of a unit hat at 0."""
    s = math.sqrt(t)
    z = offsets * dy

    def piece(a, b, alpha, beta):
        # int_a^b p_t(z - x) (alpha + beta x) dx
        A, B = (a - z) / s, (b - z) / s
        dphi = ndtr(B) - ndtr(A)
        return alpha * dphi + beta * (z * dphi - s * (_normal_pdf(B) - _normal_pdf(A)))

    left = piece(-dy, 0.0, 1.0, 1.0 / dy)
    right = piece(0.0, dy, 1.0, -1.0 / dy)
    return left, right


def semigroup_apply(t: float, f_values, spec: GridSpec) -> np.ndarray:
    """(P_t f)(y_i) for f given on the grid and taken as zero off the grid.

    The trapezoid convolution against the heat kernel is used whenever the
    kernel is resolved (sqrt(t) >= dy). For smaller t the piecewise-linear
    interpolant of f is convolved exactly instead, so the map tends to the
    identity as t -> 0.
    """
    f = np.asarray(f_values, dtype=float)
    if f.shape != (spec.n_y,):
        raise ShapeError(f"expected {spec.n_y} grid values, got shape {f.shape}")
    if t < 0:
        raise DomainError("semigroup time must be >= 0")
    if t == 0:
        return f.copy()
    n, dy = spec.n_y, spec.dy
    offsets = np.arange(-(n - 1), n, dtype=float)
    if math.sqrt(t) >= dy:
        k = heat_kernel(t, offsets * dy)
        return signal.convolve(trapezoid_weights(spec) * f, k, mode="valid")
    left, right = _hat_response(t, dy, offsets)
    out = signal.convolve(f, left + right, mode="valid")
    # the end nodes only carry half hats
    out -= f[0] * left[n - 1:]
    out -= f[-1] * right[:n]
    return out


@dataclass(frozen=True)
class Dirichlet:
    left: BoundaryValue = 0.0
    right: BoundaryValue = 0.0


@dataclass(frozen=True)
class Neumann:
    """Zero-flux boundary (ghost node mirrored)."""


NEUMANN = Neumann()


def _boundary_series(value, times):
    if callable(value):
        return np.array([float(value(t)) for t in times])
    return np.full(times.size, float(value))


class HeatOperator:
    """Pre-factorized Crank-Nicolson operator for u_t = u_yy / 2.

    Solves ``(I - dt/2 L) u+ = (I + dt/2 L) u`` with ``L = D2 / 2``. Dirichlet
    rows pin the end values to the boundary data at the new time. Neumann
    rows mirror the ghost node, which keeps the trapezoid mass exactly
    conserved.
    """

    def __init__(self, spec: GridSpec, boundary=NEUMANN):
        self.spec = spec
        self.boundary = boundary
        self.rho = spec.dt / (4.0 * spec.dy**2)
        n, r = spec.n_y, self.rho
        sub = np.full(n, -r)
        diag = np.full(n, 1.0 + 2.0 * r)
        sup = np.full(n, -r)
        sub[0] = 0.0
        sup[-1] = 0.0
        self.neumann = isinstance(boundary, Neumann)
        if self.neumann:
            sup[0] = -2.0 * r
            sub[-1] = -2.0 * r
            bl = br = np.zeros(spec.n_t + 1)
        else:
            diag[0] = diag[-1] = 1.0
            sup[0] = sub[-1] = 0.0
            times = build_axes(spec)[1]
            bl = _boundary_series(boundary.left, times)
            br = _boundary_series(boundary.right, times)
        self.sub = sub
        self.cp, self.inv_den = _engine.thomas_factor(sub, diag, sup)
        self.bvals_l, self.bvals_r = bl, br

    def describe(self) -> dict:
        if self.neumann:
            return {"kind": "neumann"}
        b = self.boundary
        return {"kind": "dirichlet",
                "left": "closed-form" if callable(b.left) else float(b.left),
                "right": "closed-form" if callable(b.right) else float(b.right)}


def cn_step(op: HeatOperator, field, step: int = 0) -> np.ndarray:
    """One Crank-Nicolson step from time index ``step`` to ``step + 1``."""
    u = np.array(field, dtype=float)
    if u.shape != (op.spec.n_y,):
        raise ShapeError(f"expected {op.spec.n_y} values, got shape {u.shape}")
    idx = min(step + 1, op.bvals_l.size - 1)
    work = np.empty_like(u)
    _engine.cn_apply(u, u, op.rho, op.neumann, op.bvals_l[idx], op.bvals_r[idx],
                     op.sub, op.cp, op.inv_den, work)
    return u


def solve_limit(F, op: HeatOperator) -> FieldPath:
    """Deterministic heat flow from F: snapshot 0 is F, each step one cn_step."""
    from .solver import run_path  # deferred: solver imports this module

    return run_path(op.spec, None, 0.0, F, None, op)
