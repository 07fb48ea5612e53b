"""Limiting covariances of the fluctuation field by deterministic quadrature.

Two forms of the general covariance are computed:

* plain:    int_0^t int_U <G(a, ., u0_s), f> <G(a, ., u0_s), g> da ds
* smoothed: the same with f, g replaced by P_{t-s} f, P_{t-s} g

The smoothed form is evaluated on the y-grid padded by about 8 sqrt(t) on both
sides, with u0 extended by its edge values and the test functions evaluated in
closed form there. Without the padding, heat flow carries part of P_{t-s} f
off the grid and the y-integral loses it.

together with the two model-specific reductions written in terms of the limit
measure mu_s = d u0_s / dy:

* sbm: int_0^t <mu_s, f g> ds
* fvp: int_0^t (<mu_s, f g> - <mu_s, f><mu_s, g> - <mu_s, g><mu_s, f> + <mu_s, f><mu_s, g>) ds

For measure pairings f and g are first replaced by -f' and -g'. The
y-integrals use trapezoid weights and the s-integral is a trapezoid over the
time nodes 0..t. The a-integral over [a_min, a_max] is exact: for a fixed
discrete field, a -> sum_j G(a, y_j, u_j) v_j is piecewise constant with
breaks at the field values (plus a = 0 for sbm and the cell edges for
tables), so it is summed interval by interval. A midpoint rule on the a-grid
converges only at O(da) here, because the integrand behaves like f at the
quantile y(a) of the field and that is singular at the ends of the range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ValidationError
from .fieldpath import FieldPath
from .grid import GridSpec, build_axes, trapezoid_weights
from .heat import semigroup_apply
from .initial import check_distribution_path
from .kernel import GKernelSpec, eval_G
from .testfn import TestFunction, effective_values, evaluate

MODES = ("plain", "smoothed")
PAIRINGS = ("distribution", "measure")


@dataclass(frozen=True)
class CovRequest:
    kernel: GKernelSpec
    u0: FieldPath
    f: TestFunction
    g: TestFunction
    t: int
    mode: str = "plain"
    pairing: str = "distribution"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown covariance mode {self.mode!r}", field="mode")
        if self.pairing not in PAIRINGS:
            raise ConfigError(f"unknown pairing {self.pairing!r}", field="pairing")
        if not 0 <= self.t <= self.u0.spec.n_t:
            raise IndexError(f"time index {self.t} outside 0..{self.u0.spec.n_t}")


def kernel_moments(kernel: GKernelSpec, a_mid: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """H[k] = sum_j G(a_k, y_j, u_j) v_j for every midpoint a_k.

    Sorting u turns each indicator sum into a prefix sum, so the cost is
    O((n_y + n_a) log n_y) instead of O(n_y n_a).
    """
    if kernel.kind == "table":
        breaks = np.asarray(kernel.u_breaks, dtype=float)
        bins = np.searchsorted(breaks, u, side="right")
        per_bin = np.bincount(bins, weights=v, minlength=breaks.size + 1)
        edges = kernel._arrays["edges"]
        cell = np.clip(np.searchsorted(edges, a_mid, side="right") - 1, 0, edges.size - 2)
        inside = (a_mid >= edges[0]) & (a_mid <= edges[-1])
        return np.where(inside, kernel._arrays["values"][cell] @ per_bin, 0.0)
    order = np.argsort(u, kind="stable")
    us = u[order]
    cum = np.concatenate([[0.0], np.cumsum(v[order])])
    total = cum[-1]
    at_least = total - cum[np.searchsorted(us, a_mid, side="left")]   # sum over u_j >= a
    if kernel.kind == "fvp":
        return at_least - float(np.dot(u, v))
    at_most = cum[np.searchsorted(us, a_mid, side="right")]           # sum over u_j <= a
    return np.where(a_mid > 0, at_least, 0.0) + np.where(a_mid < 0, at_most, 0.0) + \
        np.where(a_mid == 0, at_least + at_most, 0.0)


def kernel_moments_direct(kernel, a_mid, u, v):
    """Reference O(n_y n_a) evaluation of kernel_moments."""
    return eval_G(kernel, a_mid[:, None], 0.0, u[None, :]) @ v


def a_intervals(kernel: GKernelSpec, spec: GridSpec, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Midpoints and lengths of the intervals of [a_min, a_max] on which G(., y, u_j) is constant."""
    lo, hi = spec.a_min, spec.a_max
    extra = [0.0] if kernel.kind == "sbm" else []
    if kernel.kind == "table":
        extra = list(kernel._arrays["edges"])
        cuts = np.asarray(extra, dtype=float)
    else:
        cuts = np.concatenate([u, extra])
    b = np.unique(np.concatenate([[lo, hi], cuts[(cuts > lo) & (cuts < hi)]]))
    return 0.5 * (b[:-1] + b[1:]), np.diff(b)


def _time_weights(n: int, dt: float) -> np.ndarray:
    w = np.full(n + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def padded_spec(spec: GridSpec, n_pad: int) -> GridSpec:
    """Same grid with n_pad extra y-nodes on each side."""
    if n_pad == 0:
        return spec
    return replace(spec, y_min=spec.y_min - n_pad * spec.dy, y_max=spec.y_max + n_pad * spec.dy,
                   n_y=spec.n_y + 2 * n_pad)


def cov_matrix(kernel: GKernelSpec, u0: FieldPath, fns, t: int, mode: str = "plain",
               pairing: str = "distribution") -> np.ndarray:
    """Covariance matrix [cov(f_i, f_j)] at time index t for a list of test functions."""
    if mode not in MODES:
        raise ConfigError(f"unknown covariance mode {mode!r}", field="mode")
    spec = u0.spec
    if not 0 <= t <= spec.n_t:
        raise IndexError(f"time index {t} outside 0..{spec.n_t}")
    m = len(fns)
    if t == 0:
        return np.zeros((m, m))
    snaps = u0.snapshots
    if mode == "smoothed":
        n_pad = int(math.ceil(8.0 * math.sqrt(t * spec.dt) / spec.dy))
        spec = padded_spec(spec, n_pad)
        snaps = np.pad(snaps[: t + 1], ((0, 0), (n_pad, n_pad)), mode="edge")
    w = trapezoid_weights(spec)
    base = np.stack([effective_values(f, spec, pairing) for f in fns])
    tw = _time_weights(t, spec.dt)
    out = np.zeros((m, m))
    for s in range(t + 1):
        if mode == "smoothed":
            lag = (t - s) * spec.dt
            vals = np.stack([semigroup_apply(lag, b, spec) for b in base])
        else:
            vals = base
        u = snaps[s]
        a_pts, lengths = a_intervals(kernel, spec, u)
        H = np.stack([kernel_moments(kernel, a_pts, u, w * v) for v in vals])
        out += tw[s] * ((H * lengths) @ H.T)
    return out


def cov_general(req: CovRequest) -> float:
    """Covariance of two pairings of the limit field (plain or smoothed form)."""
    return float(cov_matrix(req.kernel, req.u0, [req.f, req.g], req.t, req.mode, req.pairing)[0, 1])


def _densities(u0: FieldPath, t: int) -> np.ndarray:
    check_distribution_path(u0.snapshots[: t + 1])
    return np.gradient(u0.snapshots[: t + 1], u0.spec.dy, axis=1)


def cov_sbm(u0: FieldPath, f: TestFunction, g: TestFunction, t: int) -> float:
    """int_0^t <mu_s, f g> ds with mu_s the centered-difference density of u0_s."""
    spec = u0.spec
    if not 0 <= t <= spec.n_t:
        raise IndexError(f"time index {t} outside 0..{spec.n_t}")
    if t == 0:
        return 0.0
    y = build_axes(spec)[0]
    mu = _densities(u0, t)
    fg = evaluate(f, y) * evaluate(g, y) * trapezoid_weights(spec)
    return float(_time_weights(t, spec.dt) @ (mu @ fg))


def cov_fvp(u0: FieldPath, f: TestFunction, g: TestFunction, t: int) -> float:
    """Four-term covariance, summed with its signs."""
    spec = u0.spec
    if not 0 <= t <= spec.n_t:
        raise IndexError(f"time index {t} outside 0..{spec.n_t}")
    if t == 0:
        return 0.0
    y = build_axes(spec)[0]
    w = trapezoid_weights(spec)
    mu = _densities(u0, t)
    fv, gv = evaluate(f, y), evaluate(g, y)
    mf, mg, mfg = mu @ (w * fv), mu @ (w * gv), mu @ (w * fv * gv)
    tw = _time_weights(t, spec.dt)
    terms = (tw @ mfg, -(tw @ (mf * mg)), -(tw @ (mg * mf)), tw @ (mf * mg))
    return float(sum(terms))


def finiteness_check(kernel: GKernelSpec, u0: FieldPath, f: TestFunction, t: int,
                     pairing: str = "distribution") -> float:
    """Diagonal smoothed covariance; a non-finite value is a meshing failure."""
    val = float(cov_matrix(kernel, u0, [f], t, "smoothed", pairing)[0, 0])
    if not np.isfinite(val):
        raise ValidationError("smoothed variance is not finite; check the mesh and test function")
    return val


def prediction_table(kernel: GKernelSpec, u0: FieldPath, fns, time_indices, pairing: str) -> dict:
    """{(t, i, j): {"plain": v, "smoothed": v}} for all i <= j and requested t."""
    table = {}
    for t in time_indices:
        plain = cov_matrix(kernel, u0, fns, t, "plain", pairing)
        smooth = cov_matrix(kernel, u0, fns, t, "smoothed", pairing)
        for i in range(len(fns)):
            for j in range(i, len(fns)):
                table[(int(t), i, j)] = {"plain": float(plain[i, j]), "smoothed": float(smooth[i, j])}
    return table
