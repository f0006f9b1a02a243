"""Verdicts from runs: speeds, logarithmic lags, envelope comparisons, audits, terraces, thresholds."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from .support import GammaSpec, SupportSpec, direction_sets, envelope_distance

MIN_T0 = 10.0
MIN_RATIO = 4.0
MIN_OBS = 50
MAX_COND = 1e12


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class Verdict:
    scenario: str
    tag: str
    measured: object
    expected: object
    tolerance: object
    passed: Optional[bool]

    def to_dict(self):
        d = asdict(self)
        d["theorem"] = d.pop("tag")
        d["pass"] = d.pop("passed")
        return d


# regression ---------------------------------------------------------------------------------

def default_window(t) -> tuple:
    """Last 75% of the run in log-time, floored at t = 10."""
    t = np.asarray(t, float)
    t_pos = t[t > 0]
    lo, hi = math.log(max(t_pos[0], MIN_T0)), math.log(t_pos[-1])
    return (max(math.exp(lo + 0.25 * (hi - lo)), MIN_T0), float(t_pos[-1]))


def _select(t, X, window, floor=True):
    t = np.asarray(t, float)
    X = np.asarray(X, float)
    if window is None:
        window = default_window(t)
    t0, t1 = window
    if floor and (t0 < MIN_T0 - 1e-12 or t1 / t0 < MIN_RATIO - 1e-12):
        raise FitError(f"window ({t0:g}, {t1:g}) needs t0 >= {MIN_T0:g} and t1/t0 >= {MIN_RATIO:g}")
    sel = (t >= t0 - 1e-9) & (t <= t1 + 1e-9) & np.isfinite(X)
    if sel.sum() < MIN_OBS:
        raise FitError(f"only {int(sel.sum())} observations in the window; need {MIN_OBS}")
    return t[sel], X[sel], (float(t0), float(t1))


def _lstsq(A, y):
    cond = np.linalg.cond(A)
    if not cond < MAX_COND:
        raise FitError(f"ill-conditioned fit (condition {cond:.3g}); widen the window")
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return coef, res


@dataclass(frozen=True)
class LagFit:
    c: float
    k: float
    b: float
    rms: float
    window: tuple
    mode: str

    def model(self, t):
        t = np.asarray(t, float)
        return self.c * t - self.k * np.log(t) - self.b


def fit_lag(t, X, c_star: Optional[float] = None, mode: str = "fix_speed",
            window: Optional[tuple] = None) -> LagFit:
    """Fit X(t) = c t - k log t - b.

    fix_speed regresses c* t - X on {log t, 1} with c = c*; fit_all regresses X on {t, log t, 1}.
    """
    ts, Xs, win = _select(t, X, window)
    lt = np.log(ts)
    if mode == "fix_speed":
        if c_star is None:
            raise ValueError("fix_speed needs c_star")
        A = np.stack([lt, np.ones_like(ts)], axis=1)
        coef, res = _lstsq(A, c_star * ts - Xs)
        return LagFit(float(c_star), float(coef[0]), float(coef[1]),
                      float(np.sqrt(np.mean(res**2))), win, mode)
    if mode == "fit_all":
        A = np.stack([ts, lt, np.ones_like(ts)], axis=1)
        coef, res = _lstsq(A, Xs)
        return LagFit(float(coef[0]), float(-coef[1]), float(-coef[2]),
                      float(np.sqrt(np.mean(res**2))), win, mode)
    raise ValueError(f"unknown mode {mode!r}")


@dataclass(frozen=True)
class SpeedEstimate:
    speed: float
    ci: float  # half-width of the 95% confidence interval
    intercept: float
    rms: float
    window: tuple


def estimate_speed(t, X, window: Optional[tuple] = None, floor: bool = True) -> SpeedEstimate:
    """Least-squares slope of X(t) on {t, 1} with a 95% confidence half-width."""
    ts, Xs, win = _select(t, X, window, floor)
    A = np.stack([ts, np.ones_like(ts)], axis=1)
    coef, res = _lstsq(A, Xs)
    n = len(ts)
    s2 = float(res @ res) / max(n - 2, 1)
    sxx = float(np.sum((ts - ts.mean()) ** 2))
    se = math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    return SpeedEstimate(float(coef[0]), float(stats.t.ppf(0.975, max(n - 2, 1)) * se),
                         float(coef[1]), float(np.sqrt(np.mean(res**2))), win)


# envelopes ----------------------------------------------------------------------------------

def _directed(A, B, treeB=None):
    if len(A) == 0:
        return 0.0
    tree = treeB or cKDTree(B)
    d, _ = tree.query(A, k=1)
    return float(d.max())


def _hausdorff_masks(P, a, b):
    """Hausdorff distance between the node subsets P[a] and P[b] of one point set."""
    na, nb = int(a.sum()), int(b.sum())
    if na == 0 and nb == 0:
        return 0.0
    if na == 0 or nb == 0:
        return math.inf
    da = _directed(P[a & ~b], P[b])
    db = _directed(P[b & ~a], P[a])
    return max(da, db)


@dataclass
class EnvelopeComparison:
    times: np.ndarray
    local: np.ndarray
    R: float
    c_star: float
    flagged: list = field(default_factory=list)
    global_gap: Optional[np.ndarray] = None


def compare_envelope(snapshots, support: SupportSpec, c_star: float, R: float,
                     lam: float = 0.5, lateral: Optional[float] = None,
                     levels=None) -> EnvelopeComparison:
    """Local Hausdorff distance between t^-1 F_lam(t) and W inside the closed ball of radius R.

    Both sets are sampled on the rescaled grid nodes of each snapshot. ``lateral`` restricts the
    comparison to |x'| <= lateral (absolute units), e.g. to leave out a boundary-affected strip;
    points below the window count as invaded and lie in W, so the comparison is confined to the
    window. Snapshots are two-dimensional fields on x' >= 0 windows symmetric about x' = 0; the
    half-window distance equals the full one for symmetric sets.
    """
    U = direction_sets(support).U
    times, local, flagged = [], [], []
    for fld in snapshots:
        t = fld.time
        if t <= 0:
            continue
        xp = fld.abs_coords(0)
        xn = fld.abs_coords(1)
        P0, P1 = np.meshgrid(xp / t, xn / t, indexing="ij")
        P = np.stack([P0.ravel(), P1.ravel()], axis=1)
        region = np.hypot(P[:, 0], P[:, 1]) <= R
        if lateral is not None:
            region &= np.abs(P[:, 0]) <= lateral / t + 1e-12
        top = xn[-1] / t
        w_inside = envelope_distance(U, P) < c_star
        if np.any(region & w_inside & (P[:, 1] >= top - 1e-12)):
            flagged.append((t, "window top cuts the envelope"))
        F = fld.values.ravel() > lam
        d = _hausdorff_masks(P, F & region, w_inside & region)
        if not math.isfinite(d):
            flagged.append((t, "empty intersection"))
        times.append(t)
        local.append(d)
    gap = None
    if levels is not None:
        gap = global_gap(levels, support, c_star)[1]
    return EnvelopeComparison(np.array(times), np.array(local), R, c_star, flagged, gap)


def _centered(x, r, dy):
    """Abscissae x + k dy within r of x, always including x itself."""
    m = math.floor(r / dy)
    return x + dy * np.arange(-m, m + 1)


def _huygens_top(gamma: GammaSpec, xp, r, dy):
    """Top of U + B_r over each abscissa: max over y of gamma(y) + sqrt(r^2 - (x - y)^2)."""
    out = np.empty(len(xp))
    for j, x in enumerate(xp):
        y = _centered(x, r, dy)
        out[j] = np.max(gamma(np.abs(y)) + np.sqrt(np.maximum(r * r - (y - x) ** 2, 0.0)))
    return out


def _subgraph_dist(gamma: GammaSpec, xp, z, dy):
    """Distance from points (x', z) to {x_N <= gamma(|x'|)} by dense search in x'."""
    out = np.empty(len(xp))
    for j, (x, zz) in enumerate(zip(xp, z)):
        d0 = zz - gamma(abs(x))
        if d0 <= 0:
            out[j] = 0.0
            continue
        y = _centered(x, d0, dy)
        out[j] = np.sqrt(np.min((y - x) ** 2 + np.maximum(zz - gamma(np.abs(y)), 0.0) ** 2))
    return out


def global_gap(levels, support: SupportSpec, c_star: float, dy: Optional[float] = None):
    """(times, d_H(F_lam(t), U + B_{c* t})) from level-set heights, for subgraph supports.

    Both sets are subgraphs over the window columns, so the distance is attained on the two
    boundary graphs.
    """
    gamma = support.as_gamma()
    if gamma is None:
        raise ValueError("global gap needs a subgraph support")
    times, gaps = [], []
    for sl in levels.slices:
        t = sl.time
        ok = sl.valid
        xp, X = sl.xprime[ok], sl.X[ok]
        if t <= 0 or xp.size == 0:
            continue
        step = dy or (sl.h / 4)
        r = c_star * t
        if xp.size == 1:
            g = abs(float(X[0]) - (float(gamma(abs(xp[0]))) + r))
        else:
            d1 = np.maximum(_subgraph_dist(gamma, xp, X, step) - r, 0.0)
            top = _huygens_top(gamma, xp, r, step)
            dxp = xp[:, None] - xp[None, :]
            d2 = np.sqrt(dxp**2 + np.maximum(top[:, None] - X[None, :], 0.0) ** 2).min(axis=1)
            g = float(max(d1.max(), d2.max()))
        times.append(t)
        gaps.append(g)
    return np.array(times), np.array(gaps)


def envelope_gap_ratio(comparison_or_gap, times=None) -> np.ndarray:
    """Series d_H / log t over the observations with t > 1."""
    if isinstance(comparison_or_gap, EnvelopeComparison):
        times, gap = comparison_or_gap.times, comparison_or_gap.global_gap
    else:
        gap = comparison_or_gap
    t = np.asarray(times, float)
    gap = np.asarray(gap, float)
    sel = t > 1
    return gap[sel] / np.log(t[sel])


def inclusion_audit(levels, support: SupportSpec, c_star: float, N: int = 2,
                    t_min: float = 1.0, dy: Optional[float] = None):
    """(times, R(t)) with R(t) = max over F_lam(t) of dist(x, U) - c* t - ((N-2)/c*) log t.

    dist(., U) grows with x_N in each column for subgraph supports, so the column tops suffice.
    """
    gamma = support.as_gamma()
    if gamma is None:
        raise ValueError("inclusion audit needs a subgraph support")
    times, Rs = [], []
    for sl in levels.slices:
        t = sl.time
        if t < t_min:
            continue
        ok = sl.valid
        d = _subgraph_dist(gamma, sl.xprime[ok], sl.X[ok], dy or sl.h / 4)
        times.append(t)
        Rs.append(float(d.max() - c_star * t - (N - 2) / c_star * math.log(t)))
    return np.array(times), np.array(Rs)


# sum supersolution ----------------------------------------------------------------------------

def covering_radius(gamma: GammaSpec) -> float:
    """Radius r such that the balls B_r(k, gamma(k) - h), k in Z, h in N cover the subgraph."""
    L = gamma.lipschitz
    return math.sqrt(0.25 + max(0.5, 0.5 * L) ** 2)


@dataclass(frozen=True)
class AuditResult:
    max_violation: float
    per_time: dict
    n_points: int


def sum_supersolution_audit(u_snapshots, gamma: GammaSpec, w_snapshots, delta: float,
                            lateral: float, n_points: int = 2000, seed: int = 0,
                            cutoff: float = 1e-14) -> AuditResult:
    """Max of u - min(v, 1) with v(t, x) = sum over k in Z, h in N of w(t, x - (k, gamma(k) - h)).

    u_snapshots are 2D fields of a subgraph run, w_snapshots radial fields started from the
    ball of radius ``delta`` at the same times. Audit points are drawn (seeded) among the
    nodes with |x'| <= lateral and u > 1e-7; lattice terms below ``cutoff`` are dropped.
    """
    h_grid = max(u_snapshots[0].domain.h) if u_snapshots else 0.0
    need = covering_radius(gamma) + h_grid
    if delta < need:
        raise ValueError(f"covering check failed: delta = {delta:g} < required {need:.4g}")
    w_by_t = {round(w.time, 9): w for w in w_snapshots}
    rng = np.random.default_rng(seed)
    per_time = {}
    worst = -math.inf
    total = 0
    for fld in u_snapshots:
        key = round(fld.time, 9)
        if key not in w_by_t:
            raise ValueError(f"no radial snapshot at t = {fld.time:g}")
        w = w_by_t[key]
        r_grid = w.abs_coords(0)
        W = w.values
        tail = np.flatnonzero(W >= cutoff)
        r_cut = r_grid[tail[-1] + 1] if tail.size and tail[-1] + 1 < len(r_grid) else r_grid[-1]
        xp = fld.abs_coords(0)
        xn = fld.abs_coords(1)
        P0, P1 = np.meshgrid(xp, xn, indexing="ij")
        u = fld.values
        cand = np.flatnonzero(((np.abs(P0) <= lateral) & (u > 1e-7)).ravel())
        if cand.size == 0:
            per_time[fld.time] = -math.inf
            continue
        pick = rng.choice(cand, size=min(n_points, cand.size), replace=False)
        px, pz, pu = P0.ravel()[pick], P1.ravel()[pick], u.ravel()[pick]
        v = np.zeros(len(pick))
        ks = np.arange(math.floor(px.min() - r_cut), math.ceil(px.max() + r_cut) + 1)
        for k in ks:
            gk = float(gamma(abs(float(k))))
            ax = px - k
            near = np.abs(ax) <= r_cut
            if not near.any():
                continue
            # rows h with |z - (gamma(k) - h)| <= r_cut
            hmin = max(0, math.floor(gk - pz[near].max() - r_cut))
            hmax = math.ceil(gk - pz[near].min() + r_cut)
            if hmax < hmin:
                continue
            hs = np.arange(hmin, hmax + 1, dtype=float)
            dz = pz[near][:, None] - (gk - hs[None, :])
            r = np.sqrt(ax[near][:, None] ** 2 + dz**2)
            v[near] += np.interp(r, r_grid, W, right=0.0).sum(axis=1)
        viol = pu - np.minimum(v, 1.0)
        m = float(viol.max())
        per_time[fld.time] = m
        worst = max(worst, m)
        total += len(pick)
    return AuditResult(worst, per_time, total)


# terraces -------------------------------------------------------------------------------------

@dataclass(frozen=True)
class TerraceReport:
    plateaus: tuple
    widths: tuple
    confidence: tuple
    speeds: tuple  # (upper-level speed, lower-level speed) per plateau

    @property
    def found(self) -> bool:
        return len(self.plateaus) > 0


def detect_terrace(fld, level_series: Optional[dict] = None, band: float = 0.02,
                   mass: float = 0.05, bins: int = 50) -> TerraceReport:
    """Plateaus of a 1D or radial field: histogram modes in (band, 1 - band) with mass >= mass.

    ``level_series`` maps levels to (t, X) arrays; speeds are fitted for the levels nearest
    above and below each plateau.
    """
    u = np.asarray(fld.values, float).ravel()
    h = fld.domain.h[0]
    hist, edges = np.histogram(u, bins=bins, range=(0.0, 1.0))
    frac = hist / u.size
    plateaus, widths, conf, speeds = [], [], [], []
    for i in range(bins):
        lo, hi = edges[i], edges[i + 1]
        if lo < band or hi > 1.0 - band:
            continue
        left = frac[i - 1] if i > 0 else 0.0
        right = frac[i + 1] if i + 1 < bins else 0.0
        if frac[i] < mass or frac[i] < left or frac[i] < right:
            continue
        sel = (u >= lo) & (u < hi)
        val = float(np.mean(u[sel]))
        if plateaus and abs(val - plateaus[-1]) < band:
            continue
        near = np.abs(u - val) <= band
        plateaus.append(val)
        widths.append(float(near.sum() * h))
        conf.append(float(near.mean()))
        sp = (math.nan, math.nan)
        if level_series:
            levels = sorted(level_series)
            above = [l for l in levels if l > val + band]
            below = [l for l in levels if l < val - band]
            if above and below:
                sp = tuple(estimate_speed(*level_series[l], window=_late(level_series[l][0]),
                                          floor=False).speed
                           for l in (above[0], below[-1]))
        speeds.append(sp)
    return TerraceReport(tuple(plateaus), tuple(widths), tuple(conf), tuple(speeds))


def _late(t):
    t = np.asarray(t, float)
    return (float(t[0] + 0.5 * (t[-1] - t[0])), float(t[-1]))


# invasion thresholds --------------------------------------------------------------------------

@dataclass(frozen=True)
class Threshold:
    bracket: tuple
    samples: tuple  # (L, outcome) pairs in evaluation order

    @property
    def width(self) -> float:
        return self.bracket[1] - self.bracket[0]


def classify_outcome(spec, L: float, h: float = 0.1, T: float = 200.0, extent: float = 150.0,
                     T_max: float = 1000.0) -> str:
    """'invasion' (u(T, 0) > 0.99), 'extinction' (max u < 0.01) or an error if undecided."""
    from .pde import Boundary, Domain, SolverConfig, advance, init_from_support

    dom = Domain.line(0.0, extent, h, Boundary.neumann(), Boundary.neumann())
    fld = init_from_support(SupportSpec.ball([0.0], L), dom)
    t_run = T
    while True:
        rec = advance(fld, spec, SolverConfig(max_time=t_run, cadence=t_run))
        fld = rec.final
        if fld.values[0] > 0.99:
            return "invasion"
        if fld.values.max() < 0.01:
            return "extinction"
        if fld.time >= T_max - 1e-9:
            raise RuntimeError(f"outcome undecided for L = {L:g} at t = {fld.time:g}")
        t_run = min(T, T_max - fld.time)


def threshold_bisection(spec, L_lo: float, L_hi: float, width: float = 0.01, **kw) -> Threshold:
    """Bisect the half-width L of 1_[-L, L] between extinction and invasion."""
    samples = []

    def run(L):
        out = classify_outcome(spec, L, **kw)
        samples.append((L, out))
        done = sorted(samples)
        seen_inv = False
        for _, o in done:
            if o == "invasion":
                seen_inv = True
            elif seen_inv:
                raise RuntimeError("non-monotone outcomes in L; solver fault suspected")
        return out

    if run(L_lo) != "extinction":
        raise ValueError(f"L = {L_lo:g} does not go extinct")
    if run(L_hi) != "invasion":
        raise ValueError(f"L = {L_hi:g} does not invade")
    lo, hi = L_lo, L_hi
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if run(mid) == "invasion":
            hi = mid
        else:
            lo = mid
    return Threshold((lo, hi), tuple(samples))


def invasion_radius(spec, rho0: float = 0.5, rho_max: float = 64.0, **kw) -> tuple:
    """Smallest rho = rho0 2^k for which 1_[-rho, rho] invades, with the (rho, outcome) samples.

    The radius beyond which balls invade is not known in closed form for general f, so it
    is found by doubling.
    """
    samples = []
    rho = rho0
    while rho <= rho_max * (1 + 1e-12):
        out = classify_outcome(spec, rho, **kw)
        samples.append((rho, out))
        if out == "invasion":
            return rho, tuple(samples)
        rho *= 2.0
    raise ValueError(f"no invasion up to rho = {rho_max:g}")
