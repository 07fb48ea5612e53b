"""Monte-Carlo ensembles of centered pairings and the estimators built on them."""

from __future__ import annotations

import hashlib
import json
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _engine
from .errors import (ConfigError, DegenerateSampleError, InsufficientDataError, SchemaError,
                     ShapeError)
from .fieldpath import FieldPath, PathFlags
from .grid import GridSpec, build_axes, trapezoid_weights
from .heat import HeatOperator
from .kernel import GKernelSpec
from .noise import NoiseStream, substream_description
from .solver import PathEngine, _prepare, default_operator, run_path
from .testfn import TestFunction, pairing_vector

REPLICATE_BLOCK = 16


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def fingerprint(spec: GridSpec, kernel: GKernelSpec | None, eps: float, F: np.ndarray, fns,
                times, pairing: str, op: HeatOperator) -> str:
    """Hash of everything that determines the sampled law (the seed excluded)."""
    return _digest({
        "grid": spec.to_dict(),
        "kernel": kernel.to_dict() if kernel is not None else None,
        "eps": float(eps),
        "F": hashlib.sha256(np.ascontiguousarray(F, dtype="<f8").tobytes()).hexdigest(),
        "fns": [f.to_dict() for f in fns],
        "times": [int(t) for t in times],
        "pairing": pairing,
        "operator": op.describe(),
    })


@dataclass
class EnsembleResult:
    """Pairings of N replicates: ``samples[r, k, i] = <Z_{times[k]}, fns[i]>``."""

    samples: np.ndarray
    times: list
    fns: list
    pairing: str
    eps: float
    master_seed: int
    fingerprint: str
    flags: list = field(default_factory=list)
    spec: GridSpec | None = None
    kernel_kind: str = "none"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.shape != (len(self.flags), len(self.times), len(self.fns)):
            raise ShapeError("samples must have shape (N, times, fns) with one flag set per replicate")

    @property
    def n_replicates(self) -> int:
        return self.samples.shape[0]

    @property
    def valid(self) -> np.ndarray:
        return np.array([fl.valid for fl in self.flags], dtype=bool)

    @property
    def n_flagged(self) -> int:
        return int((~self.valid).sum())

    def slot(self, t: int) -> int:
        try:
            return self.times.index(int(t))
        except ValueError:
            raise IndexError(f"time index {t} was not recorded") from None

    def values(self, t: int, i: int) -> np.ndarray:
        """Valid-replicate samples of one (time, function) cell."""
        return self.samples[self.valid, self.slot(t), i]

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.fingerprint.encode())
        h.update(str(self.master_seed).encode())
        h.update(np.ascontiguousarray(self.samples, dtype="<f8").tobytes())
        h.update(json.dumps([fl.to_dict() for fl in self.flags], sort_keys=True).encode())
        return h.hexdigest()

    def flag_summary(self) -> dict:
        return {
            "replicates": self.n_replicates,
            "flagged": self.n_flagged,
            "range_exits": int(sum(fl.range_exit for fl in self.flags)),
            "clamp_excess": int(sum(fl.clamp_excess for fl in self.flags)),
            "clamp_count": int(sum(fl.clamp_count for fl in self.flags)),
            "monotone_violations": int(sum(fl.monotone_violations for fl in self.flags)),
            "weighted_norm_max": max((fl.weighted_norm_sup for fl in self.flags), default=0.0),
        }


class _BlockJob:
    """Everything a worker needs to run a block of replicates."""

    def __init__(self, engine: PathEngine, F, u0_rows, pw, times, master_seed):
        self.engine, self.F, self.u0_rows, self.pw = engine, F, u0_rows, pw
        self.uniq = sorted(set(times))
        self.pos = [self.uniq.index(t) for t in times]
        self.rec_slot = np.full(engine.spec.n_t + 1, -1, dtype=np.int64)
        for k, t in enumerate(self.uniq):
            self.rec_slot[t] = k
        self.master_seed = master_seed
        self.inv_sqeps = 1.0 / engine.sqeps

    def run(self, start: int, stop: int):
        n_u, m = len(self.uniq), self.pw.shape[0]
        out = np.empty((stop - start, len(self.pos), m))
        flags = []
        buf = np.empty((n_u, m))
        for r in range(start, stop):
            stream = NoiseStream(self.master_seed, r)
            snaps, fl = self.engine.run(self.F, stream, self.rec_slot, n_u)
            _engine.pair_rows(snaps, self.u0_rows, self.inv_sqeps, self.pw, buf)
            out[r - start] = buf[self.pos]
            flags.append(fl)
        return out, flags


_JOB: _BlockJob | None = None


def _run_block(bounds):
    return _JOB.run(*bounds)


def run_ensemble(spec: GridSpec, kernel: GKernelSpec, eps: float, F, fns, times, N: int,
                 master_seed: int, workers: int = 1, op: HeatOperator | None = None,
                 pairing: str = "measure", check_kernel: bool = True) -> EnsembleResult:
    """Sample N replicates of the centered pairings at the given time indices.

    Replicates are split into fixed blocks of REPLICATE_BLOCK and each result
    is written to its replicate slot, so the output does not depend on
    ``workers``.
    """
    global _JOB
    if N < 2:
        raise ConfigError("need at least 2 replicates", field="replicates")
    if workers < 1:
        raise ConfigError("workers must be a positive integer", field="workers")
    if not fns:
        raise ConfigError("at least one test function is required", field="test_functions")
    times = [int(t) for t in times]
    if not times or any(not 0 <= t <= spec.n_t for t in times):
        raise ConfigError(f"time indices must lie in 0..{spec.n_t}", field="times")
    if op is None:
        op = default_operator(spec, kernel)
    engine, F = _prepare(spec, kernel, eps, F, op, check_kernel)
    fp = fingerprint(spec, kernel, eps, F, fns, times, pairing, op)
    pw = np.ascontiguousarray(np.stack([pairing_vector(f, spec, pairing) for f in fns]))

    if eps == 0:
        u0 = run_path(spec, None, 0.0, F, None, op)
        flags = [PathFlags(weighted_norm_sup=u0.flags.weighted_norm_sup) for _ in range(N)]
        return EnsembleResult(np.zeros((N, len(times), len(fns))), times, list(fns), pairing,
                              0.0, master_seed, fp, flags, spec, kernel.kind)

    u0 = run_path(spec, None, 0.0, F, None, op)
    job = _BlockJob(engine, F, None, pw, times, master_seed)
    job.u0_rows = np.ascontiguousarray(u0.snapshots[job.uniq])
    bounds = [(s, min(s + REPLICATE_BLOCK, N)) for s in range(0, N, REPLICATE_BLOCK)]
    if workers == 1 or len(bounds) == 1:
        parts = [job.run(*b) for b in bounds]
    else:
        job.run(0, 1)  # compile in the parent so forked workers inherit it
        _JOB = job
        try:
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=min(workers, len(bounds)), mp_context=ctx) as ex:
                parts = list(ex.map(_run_block, bounds))
        finally:
            _JOB = None
    samples = np.concatenate([p[0] for p in parts])
    flags = [fl for p in parts for fl in p[1]]
    return EnsembleResult(samples, times, list(fns), pairing, float(eps), master_seed, fp, flags, spec,
                          kernel.kind)


def cov_from_samples(x, y) -> tuple[float, float]:
    """Unbiased covariance and its delta-method standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2 or y.size != n:
        raise InsufficientDataError("need at least 2 paired samples")
    dx, dy = x - x.mean(), y - y.mean()
    prod = dx * dy
    est = prod.sum() / (n - 1)
    c = prod.mean()
    se = math.sqrt(max(float(np.mean(prod * prod)) - c * c, 0.0) / n)
    return float(est), se


def empirical_cov(ens: EnsembleResult, t: int, i: int, j: int) -> tuple[float, float]:
    """Covariance of <Z_t, f_i> and <Z_t, f_j> over valid replicates."""
    valid = ens.valid
    if valid.sum() < 2:
        raise InsufficientDataError(f"only {int(valid.sum())} valid replicates")
    k = ens.slot(t)
    return cov_from_samples(ens.samples[valid, k, i], ens.samples[valid, k, j])


def normality_stats(samples) -> tuple[float, float, float]:
    """(skewness, excess kurtosis, jb) from central sample moments."""
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < 8:
        raise InsufficientDataError("normality statistics need at least 8 samples")
    d = x - x.mean()
    m2 = float(np.mean(d * d))
    if not m2 > 0 or m2 <= (1e-14 * max(1.0, float(np.max(np.abs(x))))) ** 2:
        raise DegenerateSampleError("sample variance is zero")
    skew = float(np.mean(d**3)) / m2**1.5
    kurt = float(np.mean(d**4)) / m2**2 - 3.0
    return skew, kurt, n * (skew**2 / 6.0 + kurt**2 / 24.0)


def bootstrap_normality_se(samples, n_boot: int = 200, seed: int = 0) -> tuple[float, float]:
    """Bootstrap standard errors of (skewness, excess kurtosis)."""
    x = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    reps = np.array([normality_stats(x[rng.integers(0, x.size, x.size)])[:2] for _ in range(n_boot)])
    return float(reps[:, 0].std(ddof=1)), float(reps[:, 1].std(ddof=1))


@dataclass
class MomentScaling:
    slope: float
    intercept: float
    ci: tuple
    degenerate: bool
    gaps: list
    moments: list
    n: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "ci": list(self.ci),
                "degenerate": self.degenerate, "gaps": self.gaps, "fourth_moments": self.moments,
                "n": self.n}


def _fit(log_gap, m4):
    return np.polyfit(log_gap, np.log(m4), 1)


def fit_moment_scaling(increments, gaps, n_boot: int = 1000, seed: int = 0) -> MomentScaling:
    """Fit log E|D|^4 = slope * log(gap) + intercept.

    ``increments`` has shape (N, n_gaps); rows are replicates, so the
    bootstrap resamples whole rows and keeps the dependence between gaps.
    """
    inc = np.asarray(increments, dtype=float)
    gaps = [float(g) for g in gaps]
    if inc.ndim != 2 or inc.shape[1] != len(gaps):
        raise ShapeError("increments must be (N, n_gaps)")
    if len(set(gaps)) < 3 or max(gaps) / min(gaps) < 10.0 * (1 - 1e-9):
        raise ConfigError("need 3 distinct gaps spanning at least one decade", field="gaps")
    m4 = np.mean(inc**4, axis=0)
    if np.any(m4 == 0):
        return MomentScaling(math.nan, math.nan, (math.nan, math.nan), True, gaps, m4.tolist(), inc.shape[0])
    lg = np.log(gaps)
    slope, intercept = _fit(lg, m4)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        mb = np.mean(inc[rng.integers(0, inc.shape[0], inc.shape[0])] ** 4, axis=0)
        if np.all(mb > 0):
            boots.append(_fit(lg, mb)[0])
    lo, hi = np.percentile(boots, [2.5, 97.5]) if boots else (math.nan, math.nan)
    return MomentScaling(float(slope), float(intercept), (float(lo), float(hi)), False, gaps,
                         m4.tolist(), inc.shape[0])


def increment_moment_scaling(spec: GridSpec, kernel: GKernelSpec, eps: float, F, f: TestFunction,
                             t_pairs, N: int, master_seed: int, workers: int = 1,
                             op: HeatOperator | None = None, pairing: str = "distribution",
                             n_boot: int = 1000) -> MomentScaling:
    """Fourth-moment scaling of pairing increments over the (t1, t2) index pairs."""
    t_pairs = [(int(a), int(b)) for a, b in t_pairs]
    times = sorted({t for p in t_pairs for t in p})
    ens = run_ensemble(spec, kernel, eps, F, [f], times, N, master_seed, workers, op, pairing)
    return moment_scaling_from_ensemble(ens, t_pairs, n_boot)


def moment_scaling_from_ensemble(ens: EnsembleResult, t_pairs, n_boot: int = 1000) -> MomentScaling:
    dt = ens.spec.dt
    valid = ens.valid
    inc = np.stack([ens.samples[valid, ens.slot(b), 0] - ens.samples[valid, ens.slot(a), 0]
                    for a, b in t_pairs], axis=1)
    gaps = [abs(b - a) * dt for a, b in t_pairs]
    return fit_moment_scaling(inc, gaps, n_boot, seed=ens.master_seed & 0xFFFFFFFF)


def weighted_norm_monitor(path: FieldPath) -> float:
    """sup_s of the trapezoid value of int |u_s(x)|^2 e^(-2|x|) dx."""
    y = build_axes(path.spec)[0]
    ww = trapezoid_weights(path.spec) * np.exp(-2.0 * np.abs(y))
    return float(np.max(path.snapshots**2 @ ww))


def coupled_differences(spec: GridSpec, kernel: GKernelSpec, F, eps_list, f: TestFunction, t: int,
                        N: int, master_seed: int, op: HeatOperator | None = None,
                        pairing: str = "distribution") -> dict:
    """Mean and SE over replicates of |<Z^eps_t - Z^{eps_min}_t, f>| with common noise.

    Replicates flagged at any eps are dropped from every column.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 2 or any(b >= a for a, b in zip(eps_list, eps_list[1:])) or eps_list[-1] <= 0:
        raise ConfigError("eps list must be strictly decreasing positives", field="epsilon")
    cols, valid = [], np.ones(N, dtype=bool)
    for e in eps_list:
        ens = run_ensemble(spec, kernel, e, F, [f], [t], N, master_seed, 1, op, pairing)
        cols.append(ens.samples[:, 0, 0])
        valid &= ens.valid
    Z = np.stack(cols, axis=1)[valid]
    diff = np.abs(Z - Z[:, -1:])
    n = diff.shape[0]
    if n < 2:
        raise InsufficientDataError("fewer than 2 replicates valid at every eps")
    return {"eps": eps_list, "mean": diff.mean(axis=0).tolist(),
            "se": (diff.std(axis=0, ddof=1) / math.sqrt(n)).tolist(), "n": n,
            "flagged": int(N - n)}


@dataclass
class CltReport:
    cells: list
    normality: list
    metadata: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"metadata": self.metadata, "cells": self.cells, "normality": self.normality,
                "diagnostics": self.diagnostics}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    def content_hash(self) -> str:
        d = self.to_dict()
        d["metadata"] = {k: v for k, v in d["metadata"].items() if k != "wall_clock"}
        return hashlib.sha256(json.dumps(d, sort_keys=True, default=_json_default).encode()).hexdigest()

    def to_text(self) -> str:
        m = self.metadata
        lines = [f"CLT report  kernel={m.get('kernel')}  eps={m.get('eps')}  N={m.get('n_valid')}"
                 f"/{m.get('n_replicates')}  pairing={m.get('pairing')}  units: covariance of pairings",
                 f"{'t':>8} {'i':>2} {'j':>2} {'empirical':>12} {'se':>10} {'plain':>12} "
                 f"{'z_plain':>9} {'smoothed':>12} {'z_smooth':>9}"]
        for c in self.cells:
            lines.append(f"{c['t']:>8.4f} {c['i']:>2} {c['j']:>2} {c['empirical']:>12.6g} {c['se']:>10.3g} "
                         f"{c['plain']:>12.6g} {c['z_plain']:>9.3g} {c['smoothed']:>12.6g} {c['z_smoothed']:>9.3g}")
        lines.append(f"{'t':>8} {'i':>2} {'skew':>10} {'ex.kurt':>10} {'jb':>10} {'n':>6}")
        for r in self.normality:
            if r.get("degenerate"):
                lines.append(f"{r['t']:>8.4f} {r['i']:>2}   degenerate sample")
            else:
                lines.append(f"{r['t']:>8.4f} {r['i']:>2} {r['skew']:>10.4f} {r['kurt']:>10.4f} "
                             f"{r['jb']:>10.3f} {r['n']:>6}")
        return "\n".join(lines)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _z(emp: float, pred: float, se: float) -> tuple[float, bool]:
    gap = emp - pred
    if se > 0:
        return gap / se, False
    if gap == 0:
        return 0.0, False
    return math.copysign(math.inf, gap), True


def build_report(ens: EnsembleResult, predictions: dict, diagnostics: dict | None = None,
                 metadata: dict | None = None) -> CltReport:
    """Assemble z-scores per prediction mode and the normality table.

    ``predictions`` maps (t, i, j) with i <= j to {"plain": v, "smoothed": v}.
    """
    m = len(ens.fns)
    dt = ens.spec.dt if ens.spec is not None else 1.0
    cells, normality = [], []
    for t in ens.times:
        for i in range(m):
            for j in range(i, m):
                pred = predictions.get((t, i, j))
                if pred is None or not {"plain", "smoothed"} <= set(pred):
                    raise SchemaError(f"prediction table has no plain/smoothed entry for {(t, i, j)}")
                emp, se = empirical_cov(ens, t, i, j)
                zp, inf_p = _z(emp, pred["plain"], se)
                zs, inf_s = _z(emp, pred["smoothed"], se)
                cells.append({"t_index": t, "t": t * dt, "i": i, "j": j, "empirical": emp, "se": se,
                              "plain": pred["plain"], "smoothed": pred["smoothed"],
                              "z_plain": zp, "z_smoothed": zs, "infinite_z": inf_p or inf_s})
            x = ens.values(t, i)
            try:
                s, k, jb = normality_stats(x)
                normality.append({"t_index": t, "t": t * dt, "i": i, "skew": s, "kurt": k, "jb": jb,
                                  "n": int(x.size), "se_skew": math.sqrt(6.0 / x.size),
                                  "se_kurt": math.sqrt(24.0 / x.size), "degenerate": False})
            except (DegenerateSampleError, InsufficientDataError):
                normality.append({"t_index": t, "t": t * dt, "i": i, "n": int(x.size), "degenerate": True})
    meta = {
        "tool_version": __version__, "kernel": ens.kernel_kind, "fingerprint": ens.fingerprint, "master_seed": ens.master_seed,
        "eps": ens.eps, "pairing": ens.pairing, "n_replicates": ens.n_replicates,
        "n_valid": int(ens.valid.sum()), "test_functions": [f.label() for f in ens.fns],
        "degenerate": bool(np.all(ens.samples == 0)), "flags": ens.flag_summary(),
        "prng": substream_description(), "samples_hash": ens.content_hash(),
        "mode_tags": ["plain", "smoothed"],
    }
    meta.update(metadata or {})
    return CltReport(cells, normality, meta, dict(diagnostics or {}))


def mode_match(report: CltReport, k_se: float = 3.0, rel: float = 0.05) -> dict:
    """Per-mode count of cells with |emp - pred| <= k_se * SE + rel * |pred|, and the winner."""
    out = {}
    for mode in ("plain", "smoothed"):
        gaps = [abs(c["empirical"] - c[mode]) for c in report.cells]
        ok = [g <= k_se * c["se"] + rel * abs(c[mode]) for g, c in zip(gaps, report.cells)]
        zs = [abs(c[f"z_{mode}"]) for c in report.cells]
        out[mode] = {"matched": int(sum(ok)), "cells": len(ok), "all_match": all(ok),
                     "mean_abs_z": float(np.mean(zs)) if zs else 0.0,
                     "max_rel_gap": max((g / abs(c[mode]) if c[mode] else math.inf)
                                        for g, c in zip(gaps, report.cells)) if gaps else 0.0}
    p, s = out["plain"], out["smoothed"]
    key = lambda d: (-d["matched"], d["mean_abs_z"])
    out["winner"] = "plain" if key(p) <= key(s) else "smoothed"
    return out
