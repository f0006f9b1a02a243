"""Level-set heights X_lambda(t, x'), their gradients, flattening metrics and upper-level clouds.

Columns run along the propagation axis (the last array axis). Heights are absolute, i.e. the
frame offset of a moving window is already added.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

MONO_TOL = 1e-8


@dataclass(frozen=True)
class LevelSetSlice:
    time: float
    lam: float
    xprime: np.ndarray
    X: np.ndarray  # nan where invalid
    valid: np.ndarray
    multi: np.ndarray
    h: float

    def at(self, xp: float = 0.0) -> float:
        j = int(np.argmin(np.abs(self.xprime - xp)))
        return float(self.X[j])


def _columns(field):
    u = field.values
    return u[None, :] if u.ndim == 1 else u


def extract_X(field, lam: float, tol: float = MONO_TOL) -> LevelSetSlice:
    """Largest x_N with u >= lam per column, linearly interpolated between bracketing nodes.

    Levels must lie strictly between the two states 0 and 1.
    """
    if not 0.0 < lam < 1.0:
        raise ValueError(f"level {lam:g} outside (0, 1): no crossing")
    d = field.domain
    ax = d.prop_axis
    h = d.h[ax]
    xn = field.abs_coords(ax)
    cols = _columns(field)
    xp = field.abs_coords(0) if cols.shape[0] > 1 or field.values.ndim > 1 else np.zeros(1)
    ncol, n = cols.shape
    X = np.full(ncol, np.nan)
    valid = np.zeros(ncol, dtype=bool)
    multi = np.zeros(ncol, dtype=bool)
    ge = cols >= lam
    any_ge = ge.any(axis=1)
    last = n - 1 - np.argmax(ge[:, ::-1], axis=1)
    ok = any_ge & (last < n - 1)
    rows = np.flatnonzero(ok)
    i = last[rows]
    ui = cols[rows, i]
    uj = cols[rows, i + 1]
    X[rows] = xn[i] + (ui - lam) / (ui - uj) * h
    valid[rows] = True
    # a node below lam - tol before the crossing means the column crosses more than once
    below = cols < lam - tol
    idx = np.arange(n)[None, :]
    multi[rows] = np.any(below[rows] & (idx < i[:, None]), axis=1)
    if not valid.any():
        raise ValueError(f"no column crosses level {lam:g}")
    return LevelSetSlice(float(field.time), float(lam), np.asarray(xp, float), X, valid,
                         multi, float(h))


@dataclass
class LevelSetSeries:
    lam: float
    slices: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = [s.time for s in self.slices]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("level-set series times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.slices])

    def column(self, xp: float = 0.0):
        """(times, X) at the column nearest x'."""
        X = np.array([s.at(xp) for s in self.slices])
        return self.times, X

    def to_csv(self, path) -> None:
        xp = self.slices[0].xprime if self.slices else np.zeros(1)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t"] + [repr(float(v)) for v in xp])
            for s in self.slices:
                wr.writerow([repr(s.time)] + [repr(float(v)) for v in s.X])

    @classmethod
    def from_csv(cls, path, lam: float) -> "LevelSetSeries":
        with open(path) as fh:
            rows = list(csv.reader(fh))
        xp = np.array([float(v) for v in rows[0][1:]])
        h = float(xp[1] - xp[0]) if xp.size > 1 else 0.0
        slices = []
        for r in rows[1:]:
            X = np.array([float(v) for v in r[1:]])
            ok = np.isfinite(X)
            slices.append(LevelSetSlice(float(r[0]), lam, xp, X, ok, np.zeros_like(ok), h))
        return cls(lam, slices)


# gradients ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Gradient:
    xprime: np.ndarray
    grad: np.ndarray
    cross_check: Optional[np.ndarray]
    discrepancy: Optional[float]
    gaps: tuple


def _contiguous_valid(sl: LevelSetSlice):
    idx = np.flatnonzero(sl.valid)
    lo, hi = idx[0], idx[-1]
    gaps = tuple(int(j) for j in range(lo, hi + 1) if not sl.valid[j])
    return lo, hi, gaps


def grad_X(sl: LevelSetSlice, field=None, mirror_lo: bool = False) -> Gradient:
    """d X / d x' by central differences, one-sided at the ends of the valid range.

    ``mirror_lo`` treats the first column as a symmetry line (X(-h) = X(h)). With ``field``
    the implicit-function value -d_x' u / d_xN u at the interpolated points is also returned,
    together with the largest discrepancy between the two.
    """
    if sl.xprime.size < 2:
        raise ValueError("gradient needs at least two columns")
    lo, hi, gaps = _contiguous_valid(sl)
    if gaps:
        warnings.warn(f"invalid columns inside the valid range: {gaps}")
    X = sl.X
    dx = float(sl.xprime[1] - sl.xprime[0])
    g = np.full(X.shape, np.nan)
    if hi > lo:
        g[lo + 1:hi] = (X[lo + 2:hi + 1] - X[lo:hi - 1]) / (2 * dx)
        g[lo] = (X[lo + 1] - X[lo]) / dx
        g[hi] = (X[hi] - X[hi - 1]) / dx
        if mirror_lo and lo == 0:
            g[0] = 0.0
    cross = None
    disc = None
    if field is not None:
        cross = _implicit_gradient(field, sl, dx, mirror_lo)
        both = np.isfinite(cross) & np.isfinite(g)
        disc = float(np.max(np.abs(cross[both] - g[both]))) if both.any() else None
    return Gradient(sl.xprime, g, cross, disc, gaps)


def _implicit_gradient(field, sl: LevelSetSlice, dx: float, mirror_lo: bool) -> np.ndarray:
    cols = _columns(field)
    xn = field.abs_coords(field.domain.prop_axis)
    h = sl.h
    out = np.full(sl.X.shape, np.nan)
    ncol = cols.shape[0]
    for j in np.flatnonzero(sl.valid):
        x = sl.X[j]
        i = int(min(max(math.floor((x - xn[0]) / h), 0), len(xn) - 2))
        w = (x - xn[i]) / h
        dn = (cols[j, i + 1] - cols[j, i]) / h
        if dn == 0:
            continue

        def interp(k):
            return cols[k, i] * (1 - w) + cols[k, i + 1] * w

        if 0 < j < ncol - 1:
            dp = (interp(j + 1) - interp(j - 1)) / (2 * dx)
        elif j == 0 and mirror_lo:
            dp = 0.0
        elif j == 0:
            dp = (interp(1) - interp(0)) / dx
        else:
            dp = (interp(j) - interp(j - 1)) / dx
        out[j] = -dp / dn
    return out


# flattening ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Flattening:
    times: np.ndarray
    m: np.ndarray
    trailing_min: np.ndarray
    liminf_proxy: float
    centered: dict  # center -> m series over B'_R(center)
    R_used: float


def _min_abs_grad(sl, R, center, basis, mirror_lo):
    gr = grad_X(sl, mirror_lo=mirror_lo).grad
    sel = (np.abs(sl.xprime - center) <= R + 1e-12) & np.isfinite(gr)
    if not sel.any():
        return math.nan
    return float(min(np.min(np.abs(gr[sel] * e)) for e in basis))


def flattening_metric(series: LevelSetSeries, R: float, basis=(1.0,), centers=(),
                      window_fraction: float = 0.25, mirror_lo: bool = False) -> Flattening:
    """m(t) = min over |x'| <= R and basis directions of |grad X . e_i| and liminf proxies.

    The trailing minimum at time t is taken over [t - w, t] with w = window_fraction times
    the run length; the liminf proxy is the minimum over the last window_fraction of the run.
    """
    if not series.slices:
        raise ValueError("empty series")
    xp = series.slices[0].xprime
    reach = float(np.max(np.abs(xp)))
    R_used = R
    if R > reach + 1e-12:
        warnings.warn(f"R = {R:g} exceeds the lateral range {reach:g}; truncated")
        R_used = reach
    t = series.times
    m = np.array([_min_abs_grad(s, R_used, 0.0, basis, mirror_lo) for s in series.slices])
    span = window_fraction * (t[-1] - t[0])
    trail = np.array([np.nanmin(m[(t >= ti - span - 1e-12) & (t <= ti)]) for ti in t])
    last = t >= t[-1] - span - 1e-12
    centered = {float(c): np.array([_min_abs_grad(s, R_used, c, basis, mirror_lo)
                                    for s in series.slices]) for c in centers}
    return Flattening(t, m, trail, float(np.nanmin(m[last])), centered, R_used)


def sup_gradient(sl: LevelSetSlice, R: float, center: float = 0.0,
                 mirror_lo: bool = False) -> float:
    """max over |x' - center| <= R of |grad X|."""
    gr = grad_X(sl, mirror_lo=mirror_lo).grad
    sel = (np.abs(sl.xprime - center) <= R + 1e-12) & np.isfinite(gr)
    if not sel.any():
        raise ValueError("no valid column within R of the center")
    return float(np.max(np.abs(gr[sel])))


# upper level clouds -------------------------------------------------------------------------

@dataclass(frozen=True)
class UpperLevelCloud:
    time: float
    lam: float
    points: np.ndarray

    def to_csv(self, path) -> None:
        d = self.points.shape[1] if self.points.ndim == 2 and self.points.size else 1
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "lambda"] + [f"x{i + 1}" for i in range(d)])
            for p in self.points:
                wr.writerow([repr(self.time), repr(self.lam)] + [repr(float(v)) for v in p])


def upper_level_cloud(field, lam: float, mirror: bool = False) -> UpperLevelCloud:
    """Grid nodes with u > lam in absolute coordinates.

    ``mirror`` reflects a half-plane window x' >= 0 to x' < 0 (the x' = 0 column is not doubled).
    """
    u = field.values
    if u.ndim == 1:
        x = field.abs_coords(0)
        pts = x[u > lam][:, None]
    else:
        xs = [field.abs_coords(a) for a in range(u.ndim)]
        mesh = np.meshgrid(*xs, indexing="ij")
        sel = u > lam
        pts = np.stack([m[sel] for m in mesh], axis=1)
        if mirror and pts.size:
            ref = pts[pts[:, 0] > 0].copy()
            ref[:, 0] = -ref[:, 0]
            pts = np.concatenate([pts, ref])
    return UpperLevelCloud(float(field.time), float(lam), pts.astype(float))
