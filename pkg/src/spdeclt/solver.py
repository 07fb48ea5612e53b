"""Time stepping of the noisy heat equation and its fluctuation field.

Each step splits into a noise kick and a diffusion step::

    u*  = u_n + sqrt(eps) * sum_k G(a_k, y, u_n) xi_k     (G at a-cell midpoints)
    u+  = CN(u*)                                          (boundary rows reset)

Fleming-Viot fields are then clamped to [0, 1] and every clamp is counted.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from . import _engine
from .errors import ConfigError, ShapeError
from .fieldpath import FieldPath, PathFlags
from .grid import GridSpec, build_axes, trapezoid_weights
from .heat import NEUMANN, Dirichlet, HeatOperator
from .initial import validate_initial
from .kernel import GKernelSpec, condition_report, kernel_on_grid, validate_for_grid
from .noise import BLOCK_STEPS, NoiseStream, increment_scale
from .testfn import TestFunction, pair

CLAMP_FRACTION_LIMIT = 0.01

__all__ = [
    "FieldPath", "PathFlags", "default_operator", "step_spde", "simulate_path",
    "centered_field", "pair_series", "coupled_convergence", "PathEngine",
]


def default_operator(spec: GridSpec, kernel: GKernelSpec | None) -> HeatOperator:
    """Neumann for sbm/table kernels, Dirichlet (0, 1) for fvp."""
    if kernel is not None and kernel.kind == "fvp":
        return HeatOperator(spec, Dirichlet(0.0, 1.0))
    return HeatOperator(spec, NEUMANN)


@lru_cache(maxsize=64)
def kernel_admissible(kernel: GKernelSpec) -> bool:
    """Both structural bounds hold on the default probe set with the kernel's K."""
    n_quad = 2000 if kernel.kind == "table" else 10_000
    return all(row["pass"] for row in condition_report(kernel, n_quad=n_quad))


class PathEngine:
    """Static data for the compiled stepper: one per (grid, kernel, eps, operator)."""

    def __init__(self, spec: GridSpec, kernel: GKernelSpec | None, eps: float, op: HeatOperator):
        if eps < 0 or not math.isfinite(eps):
            raise ConfigError("eps must be a finite number >= 0", field="epsilon")
        if op.spec != spec:
            raise ShapeError("heat operator was built for a different grid")
        self.spec, self.kernel, self.eps, self.op = spec, kernel, float(eps), op
        if kernel is None and eps > 0:
            raise ConfigError("a kernel is required when eps > 0", field="kernel")
        y, _, a_mid = build_axes(spec)
        self.a_mid = a_mid
        kind = kernel.kind if kernel is not None else "sbm"
        self.kind_code = {"sbm": _engine.KIND_SBM, "fvp": _engine.KIND_FVP,
                          "table": _engine.KIND_TABLE}[kind]
        if kind == "table":
            self.tgrid = np.ascontiguousarray(kernel_on_grid(kernel, spec))
            self.u_breaks = np.asarray(kernel.u_breaks, dtype=float)
        else:
            self.tgrid = np.zeros((1, 1))
            self.u_breaks = np.zeros(0)
        self.clamp01 = kernel is not None and kind == "fvp"
        self.check_range = kernel is not None and kind == "sbm"
        self.lo = spec.a_min + spec.da
        self.hi = spec.a_max - spec.da
        self.ww = trapezoid_weights(spec) * np.exp(-2.0 * np.abs(y))
        self.xi_scale = increment_scale(spec)
        self.sqeps = math.sqrt(self.eps)
        self._dummy_xi = np.zeros((1, spec.n_a))

    def _advance(self, u, xi, xi_scale, n_steps, step0, rec_slot, rec_buf, diag, sqeps=None):
        op = self.op
        _engine.advance(
            u, xi, xi_scale, n_steps, step0, self.sqeps if sqeps is None else sqeps, self.kind_code, self.a_mid,
            self.tgrid, self.u_breaks, op.rho, op.neumann, op.bvals_l, op.bvals_r,
            op.sub, op.cp, op.inv_den, self.clamp01, self.lo, self.hi, self.check_range,
            self.ww, rec_slot, rec_buf, diag,
        )

    def initial_diag(self, u0: np.ndarray) -> np.ndarray:
        diag = np.zeros(4)
        diag[_engine.D_WNORM] = _engine.weighted_norm(u0, self.ww)
        diag[_engine.D_EXIT] = -1.0
        if self.check_range and (np.any(u0 < self.lo) or np.any(u0 > self.hi)):
            diag[_engine.D_EXIT] = 0.0
        return diag

    def run(self, F: np.ndarray, stream: NoiseStream | None, rec_slot: np.ndarray,
            n_rec: int) -> tuple[np.ndarray, PathFlags]:
        """Advance from F over the whole horizon, returning recorded snapshots and flags."""
        spec = self.spec
        u = np.array(F, dtype=float)
        rec_buf = np.empty((n_rec, spec.n_y))
        if rec_slot[0] >= 0:
            rec_buf[rec_slot[0]] = u
        diag = self.initial_diag(u)
        noisy = self.eps > 0 and stream is not None and not stream.silent
        if not noisy:
            self._advance(u, self._dummy_xi, 0.0, spec.n_t, 0, rec_slot, rec_buf, diag, sqeps=0.0)
        else:
            n_blocks = -(-spec.n_t // BLOCK_STEPS)
            for b in range(n_blocks):
                n_steps = min(BLOCK_STEPS, spec.n_t - b * BLOCK_STEPS)
                xi = stream.block(b, spec.n_a)
                self._advance(u, xi, self.xi_scale, n_steps, b * BLOCK_STEPS, rec_slot, rec_buf, diag)
            if stream is not None:
                stream.step_counter += spec.n_t
        return rec_buf, self.flags_from(diag)

    def flags_from(self, diag: np.ndarray) -> PathFlags:
        spec = self.spec
        clamps = int(diag[_engine.D_CLAMPS])
        node_steps = max(spec.n_t * spec.n_y, 1)
        return PathFlags(
            range_exit=bool(diag[_engine.D_EXIT] >= 0),
            exit_step=int(diag[_engine.D_EXIT]),
            clamp_count=clamps,
            clamp_excess=bool(clamps / node_steps > CLAMP_FRACTION_LIMIT),
            monotone_violations=int(diag[_engine.D_MONO]),
            weighted_norm_sup=float(diag[_engine.D_WNORM]),
        )


def _prepare(spec, kernel, eps, F, op, check_kernel):
    if op is None:
        op = default_operator(spec, kernel)
    if kernel is not None:
        validate_for_grid(kernel, spec)
        if check_kernel and not kernel_admissible(kernel):
            raise ConfigError("kernel violates its structural bounds with the configured K",
                              field="kernel.K")
    F = np.asarray(F, dtype=float)
    validate_initial(F, spec, kernel.kind if kernel is not None else "none")
    return PathEngine(spec, kernel, eps, op), F


def run_path(spec, kernel, eps, F, stream, op=None, check_kernel=True) -> FieldPath:
    """simulate_path without the eps > 0 requirement on the kernel."""
    engine, F = _prepare(spec, kernel, eps, F, op, check_kernel)
    rec_slot = np.arange(spec.n_t + 1, dtype=np.int64)
    snaps, flags = engine.run(F, stream, rec_slot, spec.n_t + 1)
    return FieldPath(
        spec, snaps, kernel.kind if kernel is not None else "none", float(eps),
        stream.master_seed if stream is not None else None,
        stream.replicate_index if stream is not None else None, flags,
    )


def simulate_path(spec: GridSpec, kernel: GKernelSpec, eps: float, F, stream: NoiseStream | None,
                  op: HeatOperator | None = None, check_kernel: bool = True) -> FieldPath:
    """Full trajectory from F driven by ``stream``.

    With ``eps == 0`` (or a silent stream) the result is bit-identical to
    ``solve_limit(F, op)``. Range exits and excessive clamping are recorded in
    ``path.flags`` and do not abort the run.
    """
    return run_path(spec, kernel, eps, F, stream, op, check_kernel)


def step_spde(u_n, kernel: GKernelSpec, eps: float, xi, op: HeatOperator,
              flags: PathFlags | None = None, step: int = 0) -> np.ndarray:
    """One splitting step: noise kick from ``xi`` (already scaled cell increments), then CN.

    ``step`` is the time index of ``u_n`` and only matters for time-dependent
    Dirichlet data. When ``flags`` is given its monitors are updated in place.
    """
    spec = op.spec
    u = np.array(u_n, dtype=float)
    xi = np.asarray(xi, dtype=float).reshape(1, -1)
    if u.shape != (spec.n_y,) or xi.shape[1] != spec.n_a:
        raise ShapeError("field or noise length does not match the grid")
    engine = PathEngine(spec, kernel, eps, op)
    rec_slot = np.full(spec.n_t + 2, -1, dtype=np.int64)
    diag = np.zeros(4)
    diag[_engine.D_EXIT] = -1.0
    n_bound = op.bvals_l.size
    if step + 1 >= n_bound:
        raise IndexError("step beyond the grid horizon")
    engine._advance(u, np.ascontiguousarray(xi), 1.0, 1, step, rec_slot, np.empty((1, spec.n_y)), diag)
    if flags is not None:
        f = engine.flags_from(diag)
        if f.range_exit and not flags.range_exit:
            flags.range_exit, flags.exit_step = True, step + 1
        flags.clamp_count += f.clamp_count
        flags.monotone_violations += f.monotone_violations
        flags.weighted_norm_sup = max(flags.weighted_norm_sup, f.weighted_norm_sup)
    return u


def noise_kick(u, kernel: GKernelSpec, xi, spec: GridSpec) -> np.ndarray:
    """sum_k G(a_k, y_j, u_j) xi_k for scaled cell increments ``xi``, without the sqrt(eps) factor."""
    engine = PathEngine(spec, kernel, 1.0, HeatOperator(spec, NEUMANN))
    u = np.ascontiguousarray(u, dtype=float)
    out = np.empty_like(u)
    _engine.noise_kick(u, np.ascontiguousarray(xi, dtype=float), 1.0, engine.kind_code, engine.a_mid,
                       engine.tgrid, engine.u_breaks, np.empty(spec.n_a + 1),
                       np.empty(engine.tgrid.shape[1]), out)
    return out


def centered_field(u_eps: FieldPath, u0: FieldPath, eps: float) -> FieldPath:
    """(u_eps - u0) / sqrt(eps), snapshot by snapshot."""
    if not eps > 0:
        raise ConfigError("eps must be > 0 to center", field="epsilon")
    if u_eps.spec != u0.spec or u_eps.snapshots.shape != u0.snapshots.shape:
        raise ShapeError("paths live on different grids")
    z = (u_eps.snapshots - u0.snapshots) / math.sqrt(eps)
    return FieldPath(u_eps.spec, z, u_eps.kernel_kind, u_eps.eps, u_eps.master_seed,
                     u_eps.replicate_index, u_eps.flags, centered=True)


def pair_series(Z: FieldPath, fns, times, mode: str = "distribution") -> np.ndarray:
    """Matrix (times x fns) of <Z_t, f> (distribution) or <Z~_t, f> = -<Z_t, f'> (measure)."""
    if mode not in ("distribution", "measure"):
        raise ConfigError(f"unknown pairing mode {mode!r}", field="pairing")
    out = np.empty((len(times), len(fns)))
    for r, n in enumerate(times):
        if not 0 <= n <= Z.spec.n_t:
            raise IndexError(f"time index {n} outside 0..{Z.spec.n_t}")
        for c, f in enumerate(fns):
            v = pair(Z.snapshots[n], f, Z.spec, order=1 if mode == "measure" else 0)
            out[r, c] = -v if mode == "measure" else v
    return out


def coupled_convergence(spec: GridSpec, kernel: GKernelSpec, F, eps_list, stream: NoiseStream,
                        f: TestFunction, t: int, op: HeatOperator | None = None,
                        mode: str = "distribution") -> list[float]:
    """|<Z^eps_t - Z^{eps_min}_t, f>| for each eps, all driven by the same noise realization."""
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(e <= 0 for e in eps_list) or any(
            b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ConfigError("eps list must be strictly decreasing positives", field="epsilon")
    if op is None:
        op = default_operator(spec, kernel)
    u0 = run_path(spec, None, 0.0, F, None, op)
    values = []
    for e in eps_list:
        s = NoiseStream(stream.master_seed, stream.replicate_index, silent=stream.silent)
        path = simulate_path(spec, kernel, e, F, s, op)
        z = centered_field(path, u0, e)
        values.append(pair_series(z, [f], [t], mode)[0, 0])
    ref = values[-1]
    return [abs(v - ref) for v in values]
