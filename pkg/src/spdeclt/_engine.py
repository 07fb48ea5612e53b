"""Compiled inner loops shared by the single-path and ensemble drivers.

Every replicate is advanced by plain sequential loops, so a replicate's
result never depends on how replicates are batched or scheduled.
"""

from __future__ import annotations

import numpy as np
from numba import njit

KIND_SBM, KIND_FVP, KIND_TABLE = 0, 1, 2

# diag slots
D_WNORM, D_CLAMPS, D_EXIT, D_MONO = 0, 1, 2, 3


def thomas_factor(sub, diag, sup):
    """Forward-elimination coefficients for a fixed tridiagonal matrix."""
    n = diag.size
    cp = np.zeros(n)
    inv_den = np.zeros(n)
    inv_den[0] = 1.0 / diag[0]
    cp[0] = sup[0] * inv_den[0]
    for j in range(1, n):
        den = diag[j] - sub[j] * cp[j - 1]
        inv_den[j] = 1.0 / den
        cp[j] = sup[j] * inv_den[j] if j < n - 1 else 0.0
    return cp, inv_den


@njit(cache=True)
def cn_apply(u, out, rho, neumann, bl, br, sub, cp, inv_den, work):
    """One Crank-Nicolson step for u_t = u_yy / 2; ``out`` may alias ``u``."""
    n = u.size
    c0 = 1.0 - 2.0 * rho
    # right-hand side
    if neumann:
        work[0] = c0 * u[0] + 2.0 * rho * u[1]
        work[n - 1] = 2.0 * rho * u[n - 2] + c0 * u[n - 1]
    else:
        work[0] = bl
        work[n - 1] = br
    for j in range(1, n - 1):
        work[j] = rho * u[j - 1] + c0 * u[j] + rho * u[j + 1]
    # forward sweep
    work[0] = work[0] * inv_den[0]
    for j in range(1, n):
        work[j] = (work[j] - sub[j] * work[j - 1]) * inv_den[j]
    # back substitution
    out[n - 1] = work[n - 1]
    for j in range(n - 2, -1, -1):
        out[j] = work[j] - cp[j] * out[j + 1]


@njit(cache=True)
def count_le(a_mid, x):
    """Number of midpoints <= x."""
    n = a_mid.size
    da = a_mid[1] - a_mid[0] if n > 1 else 1.0
    g = int(np.floor((x - a_mid[0]) / da)) + 1 if x == x else 0
    if g < 0:
        g = 0
    elif g > n:
        g = n
    while g > 0 and a_mid[g - 1] > x:
        g -= 1
    while g < n and a_mid[g] <= x:
        g += 1
    return g


@njit(cache=True)
def count_lt(a_mid, x):
    """Number of midpoints < x."""
    g = count_le(a_mid, x)
    while g > 0 and a_mid[g - 1] >= x:
        g -= 1
    return g


@njit(cache=True)
def noise_kick(u, xi, xi_scale, kind, a_mid, tgrid, u_breaks, csum, qbuf, kick):
    """kick_j = sum_k G(a_k, y_j, u_j) * xi_k * xi_scale (midpoint-in-a rule)."""
    n_a = a_mid.size
    csum[0] = 0.0
    for k in range(n_a):
        csum[k + 1] = csum[k] + xi[k] * xi_scale
    if kind == KIND_SBM:
        lt0 = count_lt(a_mid, 0.0)
        le0 = count_le(a_mid, 0.0)
        for j in range(u.size):
            uj = u[j]
            s = 0.0
            if uj >= 0.0:
                s += csum[count_le(a_mid, uj)] - csum[lt0]
            if uj <= 0.0:
                s += csum[le0] - csum[count_lt(a_mid, uj)]
            kick[j] = s
    elif kind == KIND_FVP:
        total = csum[n_a]
        for j in range(u.size):
            uj = u[j]
            kick[j] = csum[count_le(a_mid, uj)] - uj * total
    else:
        nb = qbuf.size
        for b in range(nb):
            s = 0.0
            for k in range(n_a):
                s += tgrid[k, b] * (xi[k] * xi_scale)
            qbuf[b] = s
        for j in range(u.size):
            uj = u[j]
            b = 0
            while b < u_breaks.size and u_breaks[b] <= uj:
                b += 1
            kick[j] = qbuf[b]


@njit(cache=True)
def advance(u, xi, xi_scale, n_steps, step0, sqeps, kind, a_mid, tgrid, u_breaks,
            rho, neumann, bvals_l, bvals_r, sub, cp, inv_den,
            clamp01, lo, hi, check_range, ww, rec_slot, rec_buf, diag):
    """Advance ``u`` in place through ``n_steps`` splitting steps.

    Step ``step0 + s`` consumes noise row ``s`` and produces time index
    ``step0 + s + 1``. Snapshots at indices with ``rec_slot >= 0`` are copied
    into ``rec_buf``; ``diag`` accumulates the weighted-norm maximum, the
    clamp count, the first range-exit step and monotonicity violations.
    """
    n = u.size
    n_a = a_mid.size
    csum = np.empty(n_a + 1)
    qbuf = np.empty(tgrid.shape[1])
    kick = np.empty(n)
    work = np.empty(n)
    for s in range(n_steps):
        idx = step0 + s + 1
        if sqeps != 0.0:
            noise_kick(u, xi[s], xi_scale, kind, a_mid, tgrid, u_breaks, csum, qbuf, kick)
            for j in range(n):
                u[j] = u[j] + sqeps * kick[j]
        cn_apply(u, u, rho, neumann, bvals_l[idx], bvals_r[idx], sub, cp, inv_den, work)
        if clamp01:
            for j in range(n):
                if u[j] < 0.0:
                    u[j] = 0.0
                    diag[D_CLAMPS] += 1.0
                elif u[j] > 1.0:
                    u[j] = 1.0
                    diag[D_CLAMPS] += 1.0
        if check_range and diag[D_EXIT] < 0.0:
            for j in range(n):
                if u[j] < lo or u[j] > hi:
                    diag[D_EXIT] = idx
                    break
        wn = 0.0
        for j in range(n):
            wn += ww[j] * u[j] * u[j]
        if wn > diag[D_WNORM]:
            diag[D_WNORM] = wn
        for j in range(n - 1):
            if u[j + 1] < u[j] - 1e-12:
                diag[D_MONO] += 1.0
        slot = rec_slot[idx]
        if slot >= 0:
            for j in range(n):
                rec_buf[slot, j] = u[j]


@njit(cache=True)
def pair_rows(snaps, base, inv_sqeps, pw, out):
    """out[r, i] = sum_j (snaps[r, j] - base[r, j]) * inv_sqeps * pw[i, j]."""
    for r in range(snaps.shape[0]):
        for i in range(pw.shape[0]):
            s = 0.0
            for j in range(snaps.shape[1]):
                s += (snaps[r, j] - base[r, j]) * inv_sqeps * pw[i, j]
            out[r, i] = s


@njit(cache=True)
def weighted_norm(u, ww):
    s = 0.0
    for j in range(u.size):
        s += ww[j] * u[j] * u[j]
    return s
