"""Pure numpy implementations of the compiled kernels (same signatures, same arithmetic order)."""
from __future__ import annotations

import math

import numpy as np


def _react_vec(kind, par, tab, s):
    inside = (s >= 0.0) & (s <= 1.0)
    if kind == 0:
        v = par[0] * (s * (1.0 - s))
    elif kind == 1:
        with np.errstate(invalid="ignore"):
            v = par[0] * (np.power(np.where(inside, s, 0.0), par[1]) * (1.0 - s))
    elif kind == 2:
        v = np.where(s > par[1], par[0] * ((s - par[1]) * (1.0 - s)), 0.0)
    elif kind == 3:
        v = par[0] * (s * (1.0 - s) * (s - par[1]))
    elif kind == 4:
        amp = np.where(s < par[2], par[4], par[5])
        v = par[0] * (amp * s * (s - par[1]) * (s - par[2]) * (s - par[3]) * (1.0 - s))
    else:
        nt = tab.shape[0]
        x = np.where(inside, s, 0.0) * (nt - 1)
        i = np.minimum(np.floor(x).astype(np.intp), nt - 2)
        w = x - i
        v = par[0] * (tab[i] * (1.0 - w) + tab[i + 1] * w)
    return np.where(inside, v, 0.0)


def _react_scalar(kind, par, tab, s):
    if s < 0.0 or s > 1.0:
        return 0.0
    if kind == 0:
        return par[0] * (s * (1.0 - s))
    if kind == 1:
        return par[0] * (s ** par[1] * (1.0 - s))
    if kind == 2:
        return par[0] * ((s - par[1]) * (1.0 - s)) if s > par[1] else 0.0
    if kind == 3:
        return par[0] * (s * (1.0 - s) * (s - par[1]))
    if kind == 4:
        amp = par[4] if s < par[2] else par[5]
        return par[0] * (amp * s * (s - par[1]) * (s - par[2]) * (s - par[3]) * (1.0 - s))
    nt = len(tab)
    x = s * (nt - 1)
    i = min(int(math.floor(x)), nt - 2)
    w = x - i
    return par[0] * (tab[i] * (1.0 - w) + tab[i + 1] * w)


def react_array(kind, par, tab, s):
    return _react_vec(kind, np.asarray(par), np.asarray(tab), np.asarray(s, dtype=float))


def metric_weights(n, metric, offset):
    wm = np.ones(n)
    wp = np.ones(n)
    if metric != 0.0:
        rr = (offset + np.arange(n)).astype(float)
        pos = rr > 0
        wm[pos] = 1.0 - metric / (2.0 * rr[pos])
        wp[pos] = 1.0 + metric / (2.0 * rr[pos])
    return wm, wp


def explicit_steps_1d(u, nsteps, dt, h, metric, offset, lo_kind, lo_val, hi_kind, hi_val,
                      kind, par, tab):
    n = u.shape[0]
    inv_h2 = 1.0 / (h * h)
    wm, wp = metric_weights(n, metric, offset)
    a = u.copy()
    ext = np.empty(n + 2)
    for _ in range(nsteps):
        ext[1:-1] = a
        ext[0] = lo_val if lo_kind == 0 else a[1]
        ext[-1] = hi_val if hi_kind == 0 else a[n - 2]
        if metric != 0.0:
            lap = (wm * ext[:-2] + wp * ext[2:]) - 2.0 * a
        else:
            lap = (ext[:-2] + ext[2:]) - 2.0 * a
        b = a + dt * (lap * inv_h2 + _react_vec(kind, par, tab, a))
        if lo_kind == 2:
            b[0] = a[0] + dt * (2.0 * (metric + 1.0) * (a[1] - a[0]) * inv_h2
                                + _react_scalar(kind, par, tab, a[0]))
        a = b
    u[:] = a
    return int(np.isnan(u).any())


def explicit_steps_2d(u, nsteps, dt, h0, h1, metric0, offset0, bkind, bval, kind, par, tab):
    n0, n1 = u.shape
    if n0 < 2:
        raise ValueError("explicit_steps_2d needs at least two rows")
    i0 = 1.0 / (h0 * h0)
    i1 = 1.0 / (h1 * h1)
    k0l, k0h, k1l, k1h = (int(k) for k in bkind)
    wm, wp = metric_weights(n0, metric0, offset0)
    wm = wm[:, None].copy()
    wp = wp[:, None].copy()
    cpre = np.full((n0, 1), 2.0)
    if k0l == 2:
        wm[0] = wp[0] = metric0 + 1.0
        cpre[0] = 2.0 * (metric0 + 1.0)
    a = u.copy()
    ext0 = np.empty((n0 + 2, n1))
    ext1 = np.empty((n0, n1 + 2))
    for _ in range(nsteps):
        ext0[1:-1] = a
        ext0[0] = a[1] if k0l in (1, 2) else bval[0]
        ext0[-1] = a[n0 - 2] if k0h == 1 else bval[1]
        ext1[:, 1:-1] = a
        ext1[:, 0] = bval[2] if k1l == 0 else a[:, 1]
        ext1[:, -1] = bval[3] if k1h == 0 else a[:, n1 - 2]
        l1 = (ext1[:, :-2] + ext1[:, 2:]) - 2.0 * a
        l0 = (wm * ext0[:-2] + wp * ext0[2:]) - cpre * a
        a = a + dt * ((l0 * i0 + l1 * i1) + _react_vec(kind, par, tab, a))
    u[:] = a
    return int(np.isnan(u).any())


def tridiag_solve_lines(u, sub, cprime, denom, rhs_lo, rhs_hi):
    n = u.shape[1]
    u[:, 0] = (u[:, 0] + rhs_lo) / denom[0]
    u[:, n - 1] = u[:, n - 1] + rhs_hi
    for j in range(1, n):
        u[:, j] = (u[:, j] - sub[j] * u[:, j - 1]) / denom[j]
    for j in range(n - 2, -1, -1):
        u[:, j] = u[:, j] - cprime[j] * u[:, j + 1]
    return 0


def shoot_rk4(kind, par, tab, lo, width, c, phi0, psi0, dz, nmax, rec_phi, rec_psi):
    par = [float(v) for v in par]
    tab = [float(v) for v in tab]
    iw = 1.0 / width
    p, q = phi0, psi0
    record = len(rec_phi) > 0
    if record:
        rec_phi[0] = p
        rec_psi[0] = q

    def g(s):
        return _react_scalar(kind, par, tab, lo + width * s) * iw

    code = 0
    n = nmax
    for n in range(1, nmax + 1):
        k1p = q
        k1q = -c * q - g(p)
        k2p = q + 0.5 * dz * k1q
        k2q = -c * k2p - g(p + 0.5 * dz * k1p)
        k3p = q + 0.5 * dz * k2q
        k3q = -c * k3p - g(p + 0.5 * dz * k2p)
        k4p = q + dz * k3q
        k4q = -c * k4p - g(p + dz * k3p)
        p = p + dz / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
        q = q + dz / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        if record:
            rec_phi[n] = p
            rec_psi[n] = q
        if p < 0.0:
            code = -1
            break
        if q >= 0.0:
            code = 1
            break
    if code == 0:
        n = nmax
    return code, n, p, q
