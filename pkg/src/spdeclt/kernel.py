"""Noise coefficients G(a, y, u) and the two structural bounds they must satisfy.

Built-in kinds:

* ``sbm``: ``G = 1{0 <= a <= u} + 1{u <= a <= 0}`` on the whole a-line
* ``fvp``: ``G = 1{a <= u} - u`` for ``a`` in [0, 1]
* ``table``: piecewise constant over (a-cell, u-bin) pairs, zero outside the cells

Both bounds integrate over a against Lebesgue measure:

* increment bound: ``int |G(a,y,u1) - G(a,y,u2)|^2 da <= K |u1 - u2|``
* growth bound:    ``int |G(a,y,u)|^2 da <= K (1 + u^2)``

None of the built-ins depend on y. The argument is kept so the interface can
carry a y-dependent coefficient later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError
from .grid import GridSpec, build_axes

KINDS = ("sbm", "fvp", "table")


@dataclass(frozen=True)
class GKernelSpec:
    """Noise coefficient descriptor.

    For ``table`` kernels ``a_edges`` (length m+1, increasing) delimits the
    a-cells, ``u_breaks`` (length p, increasing) splits the u-axis into p+1
    bins (bin b holds ``u_breaks[b-1] <= u < u_breaks[b]``) and ``values`` has
    shape (m, p+1).
    """

    kind: str
    K: float = 1.0
    a_edges: tuple = ()
    u_breaks: tuple = ()
    values: tuple = ()
    _arrays: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kernel kind {self.kind!r}", field="kernel.kind")
        if not self.K > 0:
            raise ConfigError("K must be positive", field="kernel.K")
        if self.kind == "table":
            edges = np.asarray(self.a_edges, dtype=float)
            breaks = np.asarray(self.u_breaks, dtype=float)
            vals = np.asarray(self.values, dtype=float)
            if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
                raise ConfigError("a_edges must be increasing with >= 2 entries", field="kernel.a_edges")
            if breaks.ndim != 1 or np.any(np.diff(breaks) <= 0):
                raise ConfigError("u_breaks must be increasing", field="kernel.u_breaks")
            if vals.shape != (edges.size - 1, breaks.size + 1):
                raise ConfigError(
                    f"values must have shape ({edges.size - 1}, {breaks.size + 1})",
                    field="kernel.values",
                )
            object.__setattr__(self, "_arrays", {"edges": edges, "breaks": breaks, "values": vals})

    @property
    def lambda_domain(self):
        """Interval carrying lambda, or None when it is the whole line (sbm)."""
        if self.kind == "fvp":
            return (0.0, 1.0)
        if self.kind == "table":
            e = self._arrays["edges"]
            return (float(e[0]), float(e[-1]))
        return None

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "K": self.K}
        if self.kind == "table":
            d.update(a_edges=list(self.a_edges), u_breaks=list(self.u_breaks),
                     values=[list(r) for r in self.values])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GKernelSpec":
        kind = d.get("kind")
        if kind == "table":
            return custom_table(d.get("a_edges", ()), d.get("u_breaks", ()),
                                d.get("values", ()), K=d.get("K", 1.0))
        return cls(kind=kind, K=float(d.get("K", 1.0)))


SBM = GKernelSpec("sbm")
FVP = GKernelSpec("fvp")


def custom_table(a_edges, u_breaks, values, K: float = 1.0) -> GKernelSpec:
    return GKernelSpec(
        "table", K=float(K),
        a_edges=tuple(float(v) for v in a_edges),
        u_breaks=tuple(float(v) for v in u_breaks),
        values=tuple(tuple(float(v) for v in row) for row in np.atleast_2d(values)),
    )


def eval_G(kernel: GKernelSpec, a, y, u):
    """G(a, y, u), broadcasting over array arguments.

    The sbm formula is applied literally, so ``G(0, y, 0) == 2``. That point
    has Lebesgue measure zero and never matters for the integrals.
    """
    a = np.asarray(a, dtype=float)
    u = np.asarray(u, dtype=float)
    if kernel.kind == "sbm":
        return ((0.0 <= a) & (a <= u)).astype(float) + ((u <= a) & (a <= 0.0)).astype(float)
    if kernel.kind == "fvp":
        if np.any((a < 0.0) | (a > 1.0)):
            raise DomainError("fvp kernel is defined for a in [0, 1] only")
        return (a <= u).astype(float) - u
    arr = kernel._arrays
    edges, breaks, vals = arr["edges"], arr["breaks"], arr["values"]
    cell = np.searchsorted(edges, a, side="right") - 1
    inside = (a >= edges[0]) & (a <= edges[-1])
    cell = np.clip(cell, 0, edges.size - 2)
    b = np.searchsorted(breaks, u, side="right")
    return np.where(inside, vals[cell, b], 0.0)


def validate_for_grid(kernel: GKernelSpec, spec: GridSpec) -> None:
    """Kernel-specific constraints on the noise axis."""
    if kernel.kind == "fvp" and (spec.a_min, spec.a_max) != (0.0, 1.0):
        raise ConfigError("fvp kernel needs the noise axis to be exactly [0, 1]", field="a_min")
    if kernel.kind == "sbm" and not spec.a_min <= 0.0 <= spec.a_max:
        raise ConfigError("sbm kernel needs a_min <= 0 <= a_max", field="a_min")


def kernel_on_grid(kernel: GKernelSpec, spec: GridSpec) -> np.ndarray:
    """Table kernels resampled onto the grid's a-midpoints, shape (n_a, p+1)."""
    if kernel.kind != "table":
        raise ValueError("only table kernels have a gridded form")
    a = build_axes(spec)[2]
    edges, vals = kernel._arrays["edges"], kernel._arrays["values"]
    cell = np.clip(np.searchsorted(edges, a, side="right") - 1, 0, edges.size - 2)
    inside = (a >= edges[0]) & (a <= edges[-1])
    return np.where(inside[:, None], vals[cell, :], 0.0)


# -- structural bounds --------------------------------------------------------

def _quad_domain(kernel, u1, u2=None, a_range=None):
    if a_range is not None:
        return a_range
    if kernel.lambda_domain is not None:
        return kernel.lambda_domain
    us = [abs(u1)] + ([] if u2 is None else [abs(u2)])
    reach = max(us) + 1.0
    return (-reach, reach)


def _midpoints(lo, hi, n):
    da = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * da, da


def _analytic_increment(kernel, u1, u2):
    if kernel.kind == "sbm":
        return abs(u1 - u2)
    if kernel.kind == "fvp":
        p1, p2 = min(max(u1, 0.0), 1.0), min(max(u2, 0.0), 1.0)
        c = u2 - u1
        return abs(p1 - p2) + 2.0 * c * (p1 - p2) + c * c
    return None


def _analytic_growth(kernel, u):
    if kernel.kind == "sbm":
        return abs(u)
    if kernel.kind == "fvp":
        p = min(max(u, 0.0), 1.0)
        return p - 2.0 * u * p + u * u
    return None


def check_con1(kernel: GKernelSpec, u1: float, u2: float, n_quad: int = 10_000,
               method: str = "auto", a_range=None) -> tuple[float, float]:
    """Increment bound: returns (lhs, lhs / |u1 - u2|).

    ``method`` is "analytic" (sbm/fvp only), "quadrature" (midpoint rule with
    ``n_quad`` cells) or "auto" (analytic when available). The ratio is nan
    for ``u1 == u2``.
    """
    if n_quad < 1:
        raise ConfigError("n_quad must be >= 1", field="n_quad")
    lhs = _analytic_increment(kernel, u1, u2) if method != "quadrature" else None
    if lhs is None:
        if method == "analytic":
            raise ValueError(f"no closed form for kind {kernel.kind!r}")
        a, da = _midpoints(*_quad_domain(kernel, u1, u2, a_range), n_quad)
        diff = eval_G(kernel, a, 0.0, u1) - eval_G(kernel, a, 0.0, u2)
        lhs = float(np.sum(diff * diff) * da)
    gap = abs(u1 - u2)
    return float(lhs), (float(lhs) / gap if gap > 0 else float("nan"))


def check_con2(kernel: GKernelSpec, u: float, n_quad: int = 10_000,
               method: str = "auto", a_range=None) -> tuple[float, float]:
    """Growth bound: returns (lhs, 1 + u^2); the caller compares lhs with K times the bound."""
    if n_quad < 1:
        raise ConfigError("n_quad must be >= 1", field="n_quad")
    lhs = _analytic_growth(kernel, u) if method != "quadrature" else None
    if lhs is None:
        if method == "analytic":
            raise ValueError(f"no closed form for kind {kernel.kind!r}")
        a, da = _midpoints(*_quad_domain(kernel, u, None, a_range), n_quad)
        g = eval_G(kernel, a, 0.0, u)
        lhs = float(np.sum(g * g) * da)
    return float(lhs), 1.0 + u * u


def default_probes(kernel: GKernelSpec) -> np.ndarray:
    if kernel.kind == "fvp":
        return np.round(np.arange(0, 21) * 0.05, 12)
    if kernel.kind == "table":
        lo, hi = kernel.lambda_domain
        b = kernel._arrays["breaks"]
        span = (min(lo, b.min(initial=lo)) - 1.0, max(hi, b.max(initial=hi)) + 1.0)
        near = (b[:, None] + np.array([-1e-3, 0.0, 1e-3])).ravel()  # straddle every jump
        return np.unique(np.concatenate([np.linspace(*span, 41), near]))
    return np.round(np.arange(-20, 21) * 0.1, 12)


def condition_report(kernel: GKernelSpec, probes=None, n_quad: int = 10_000) -> list[dict]:
    """Both bounds on every probe (pairs for the increment bound).

    Each row carries the analytic value (when there is one), the quadrature
    value, the implied constant and a pass flag against ``kernel.K``.
    """
    probes = default_probes(kernel) if probes is None else np.asarray(probes, dtype=float)
    has_closed = kernel.kind in ("sbm", "fvp")
    rows = []
    for u in probes:
        quad, bound = check_con2(kernel, float(u), n_quad, method="quadrature")
        exact = check_con2(kernel, float(u), method="analytic")[0] if has_closed else quad
        rows.append({
            "condition": "growth", "u1": float(u), "u2": float("nan"),
            "lhs_analytic": exact if has_closed else float("nan"), "lhs_quadrature": quad,
            "bound": bound, "implied_K": exact / bound,
            "pass": bool(exact <= kernel.K * bound * (1 + 1e-9)),
        })
    for i, u1 in enumerate(probes):
        for u2 in probes[i + 1:]:
            quad, _ = check_con1(kernel, float(u1), float(u2), n_quad, method="quadrature")
            exact = check_con1(kernel, float(u1), float(u2), method="analytic")[0] if has_closed else quad
            gap = abs(float(u1) - float(u2))
            rows.append({
                "condition": "increment", "u1": float(u1), "u2": float(u2),
                "lhs_analytic": exact if has_closed else float("nan"), "lhs_quadrature": quad,
                "bound": gap, "implied_K": exact / gap,
                "pass": bool(exact <= kernel.K * gap * (1 + 1e-9)),
            })
    return rows
