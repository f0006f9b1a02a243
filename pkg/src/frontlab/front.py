"""Traveling fronts phi'' + c phi' + f(phi) = 0 with phi(-inf) = 1, phi(+inf) = 0.

KPP-class reactions get the closed-form minimal speed 2 sqrt(f'(0)); ignition and bistable
reactions get their unique speed by shooting from the unstable manifold of (1, 0) and
bisecting on overshoot / undershoot.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._backend import kernels
from .reaction import (ReactionSpec, check_invasion, check_kpp_class, derivative_at_zero,
                       eval_f, trailing_integrals)

OVERSHOOT = "overshoot"
UNDERSHOOT = "undershoot"

DZ = 1e-3
EPS = 1e-6
SCAN = (-10.0, 10.0, 0.5)


class FrontError(ValueError):
    """Raised when no admissible front exists for the requested data."""

    def __init__(self, message: str, bracket: Optional["SpeedBracket"] = None):
        super().__init__(message)
        self.bracket = bracket


@dataclass(frozen=True)
class SpeedBracket:
    c_low: float
    c_high: float
    low_class: str = OVERSHOOT
    high_class: str = UNDERSHOOT

    def __post_init__(self):
        if not self.c_low < self.c_high:
            raise ValueError("bracket needs c_low < c_high")
        if self.low_class == self.high_class:
            raise ValueError("bracket endpoints must be classified differently")

    @property
    def width(self) -> float:
        return self.c_high - self.c_low


@dataclass(frozen=True)
class FrontProfile:
    speed: float
    z: np.ndarray
    phi: np.ndarray
    limits: tuple  # (left end within 1e-6 of 1, right end within 1e-6 of 0)

    def residual(self, spec: ReactionSpec, lo: float = 0.0, hi: float = 1.0,
                 skip_kinks: bool = True) -> np.ndarray:
        """|phi'' + c phi' + g(phi)| at interior samples by central differences.

        Samples whose three-point stencil straddles a point where f is not differentiable
        are reported as 0 when skip_kinks is set (the difference quotient is not consistent
        there).
        """
        dz = self.z[1] - self.z[0]
        p = self.phi
        d2 = (p[2:] - 2.0 * p[1:-1] + p[:-2]) / dz**2
        d1 = (p[2:] - p[:-2]) / (2.0 * dz)
        w = hi - lo
        g = eval_f(spec, lo + w * p[1:-1]) / w
        res = np.abs(d2 + self.speed * d1 + g)
        if skip_kinks:
            s = lo + w * p
            for k in spec.kinks:
                hit = (np.maximum(s[2:], s[:-2]) >= k) & (np.minimum(s[2:], s[:-2]) <= k)
                res[hit] = 0.0
        return res

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["z", "phi"])
            for z, p in zip(self.z, self.phi):
                wr.writerow([repr(float(z)), repr(float(p))])


# minimal speed ---------------------------------------------------------------

def kpp_minimal_speed(spec: ReactionSpec, strict: bool = True) -> float:
    """c* = 2 sqrt(f'(0)).

    With strict=True the reaction must satisfy 0 < f(s) <= f'(0)s; otherwise the value is
    only a lower bound for the minimal speed and a FrontError is raised.
    """
    d = derivative_at_zero(spec)
    if not d > 0:
        raise FrontError(f"f'(0) = {d:g} <= 0: the KPP speed formula does not apply")
    if strict and not check_kpp_class(spec).kpp0_holds:
        raise FrontError("reaction is not KPP (0 < f(s) <= f'(0)s fails); "
                         "2 sqrt(f'(0)) is only a lower bound")
    return 2.0 * math.sqrt(d)


# shooting ------------------------------------------------------------------------

def _slope(spec: ReactionSpec, x: float, side: int) -> float:
    """One-sided derivative of f at x (side=+1 right, -1 left), Richardson-extrapolated."""
    def diff(h):
        return (eval_f(spec, x + side * h) - eval_f(spec, x)) / (side * h)

    h = 1e-5
    return 2.0 * diff(h / 2) - diff(h)


class _Shooter:
    """Phase-plane integration for the reaction rescaled to the state interval [lo, hi]."""

    def __init__(self, spec: ReactionSpec, lo: float = 0.0, hi: float = 1.0,
                 dz: float = DZ, eps: float = EPS, zmax: float = 200.0):
        if not 0.0 <= lo < hi <= 1.0:
            raise ValueError("need 0 <= lo < hi <= 1")
        self.spec, self.lo, self.hi = spec, lo, hi
        self.width = hi - lo
        self.code, self.par, self.tab = spec.kernel_params()
        self.dz, self.eps = dz, eps
        self.nmax = int(round(zmax / dz))
        self.d_top = _slope(spec, hi, -1)
        self.d_bottom = _slope(spec, lo, +1)
        if not self.d_top < 0:
            raise FrontError(f"upper state {hi:g} is not stable (slope {self.d_top:g} >= 0)")

    def mu_top(self, c: float) -> float:
        # positive root of mu^2 + c mu + g'(1) = 0
        return 0.5 * (-c + math.sqrt(c * c - 4.0 * self.d_top))

    def launch(self, c: float, eps: Optional[float] = None):
        e = self.eps if eps is None else eps
        return 1.0 - e, -e * self.mu_top(c)

    def run(self, c: float, eps=None, nmax=None, record=False):
        p0, q0 = self.launch(c, eps)
        n = self.nmax if nmax is None else nmax
        if record:
            rp, rq = np.empty(n + 1), np.empty(n + 1)
        else:
            rp = rq = np.empty(0)
        code, steps, p, q = kernels.shoot_rk4(self.code, self.par, self.tab, self.lo, self.width,
                                              float(c), p0, q0, self.dz, n, rp, rq)
        if record:
            return code, steps, rp[: steps + 1], rq[: steps + 1]
        return code, steps, p, q

    def bottom_modes(self, c: float):
        """(mu_unstable, mu_stable) of the linearization at the lower state, or None."""
        d = self.d_bottom
        disc = c * c - 4.0 * d
        if d < 0:
            r = math.sqrt(disc)
            return 0.5 * (-c + r), 0.5 * (-c - r)
        if d == 0 and c > 0:
            return 0.0, -c
        return None

    def classify(self, c: float, eps=None) -> str:
        code, _, p, q = self.run(c, eps)
        if code < 0:
            return OVERSHOOT
        if code > 0:
            return UNDERSHOOT
        # unresolved after zmax: decide from the linearization at the lower state
        d = self.d_bottom
        if d > 0:
            return UNDERSHOOT if c * c >= 4.0 * d and c > 0 else OVERSHOOT
        modes = self.bottom_modes(c)
        if modes is None:
            return OVERSHOOT
        mu_u, mu_s = modes
        alpha = (q - mu_s * p) / (mu_u - mu_s)
        return UNDERSHOOT if alpha > 0 else OVERSHOOT


def _scan(sh: _Shooter) -> SpeedBracket:
    lo, hi, step = SCAN
    cs = np.arange(lo, hi + 0.5 * step, step)
    prev_c, prev = None, None
    for c in cs:
        cl = sh.classify(float(c))
        if prev == OVERSHOOT and cl == UNDERSHOOT:
            return SpeedBracket(prev_c, float(c))
        prev_c, prev = float(c), cl
    raise FrontError(f"no admissible bracket for c in [{lo:g}, {hi:g}]")


def _bisect(sh: _Shooter, br: SpeedBracket, tol: float, eps=None) -> SpeedBracket:
    lo, hi = br.c_low, br.c_high
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if sh.classify(mid, eps) == OVERSHOOT:
            lo = mid
        else:
            hi = mid
    return SpeedBracket(lo, hi)


def shoot_front_speed(spec: ReactionSpec, tol: float = 1e-6, *, states=(0.0, 1.0),
                      dz: float = DZ, eps: float = EPS, require_invasion: bool = True,
                      z_span=(-40.0, 60.0), n: Optional[int] = None, profile: bool = True):
    """Unique front speed by shooting-bisection, with the profile at that speed.

    Returns (speed, profile): speed is the midpoint of the final bracket (width <= tol);
    the profile is built at the same speed refined to floating-point resolution so that
    it solves the ODE to the sampling accuracy. ``states=(lo, hi)`` shoots the sub-front
    connecting hi to lo (used for tristable stage speeds).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    lo, hi = states
    if require_invasion and (lo, hi) == (0.0, 1.0):
        rep = check_invasion(spec)
        if not rep.invasion_holds:
            raise FrontError("invasion property fails (some trailing integral of f is not "
                             "positive): no invading front")
    sh = _Shooter(spec, lo, hi, dz=dz, eps=eps)
    br = _bisect(sh, _scan(sh), tol)
    speed = 0.5 * (br.c_low + br.c_high)
    if not profile:
        return speed, None
    fine = _bisect(sh, br, 0.0)
    prof = _build_profile(sh, fine.c_high, z_span, n, fine)
    return speed, prof


def front_profile(spec: ReactionSpec, c: float, z_span=(-40.0, 60.0), n: Optional[int] = None,
                  *, states=(0.0, 1.0), speed_tol: float = 1e-6) -> FrontProfile:
    """Sampled front at speed c, normalized by phi(0) = 1/2.

    For reactions with a unique front speed, c must be within ``speed_tol`` of it; the speed
    is then refined to floating-point resolution before sampling.
    """
    lo, hi = states
    sh = _Shooter(spec, lo, hi)
    if sh.d_bottom > 0:
        return _build_profile(sh, float(c), z_span, n, None)
    w = max(10.0 * speed_tol, 1e-9)
    a, b = sh.classify(c - w), sh.classify(c + w)
    if not (a == OVERSHOOT and b == UNDERSHOOT):
        raise FrontError(f"c = {c:g} is not an admissible front speed for this reaction")
    fine = _bisect(sh, SpeedBracket(c - w, c + w), 0.0)
    return _build_profile(sh, fine.c_high, z_span, n, fine)


def _build_profile(sh: _Shooter, c: float, z_span, n, bracket) -> FrontProfile:
    z0, z1 = float(z_span[0]), float(z_span[1])
    if not z0 < 0 < z1:
        raise ValueError("z_span must contain 0 in its interior")
    if n is None:
        n = int(round((z1 - z0) / sh.dz)) + 1
    z = np.linspace(z0, z1, n)
    dzs = z[1] - z[0]
    sub = max(1, int(math.ceil(dzs / sh.dz - 1e-9)))
    step = dzs / sub
    integ = _Shooter(sh.spec, sh.lo, sh.hi, dz=step, eps=sh.eps)
    mu = integ.mu_top(c)

    def trajectory(P):
        # virtual launch (offset eps) at position P; returns phi on the grid
        j = max(0, int(math.ceil((P - z0) / dzs - 1e-12)))
        s = z0 + j * dzs - P
        eps = integ.eps * math.exp(mu * s)
        if eps > 1e-3:
            raise FrontError("z_span is too short on the left to resolve the approach to 1")
        if j >= n:
            return 1.0 - integ.eps * np.exp(mu * (z - P)), None
        steps = (n - 1 - j) * sub
        code, done, rp, rq = integ.run(c, eps=eps, nmax=steps, record=True)
        phi = np.empty(n)
        phi[:j] = 1.0 - integ.eps * np.exp(mu * (z[:j] - P))
        got = rp[::sub]
        qs = rq[::sub]
        m = min(len(got), n - j)
        phi[j:j + m] = got[:m]
        psi = np.full(n, np.nan)
        psi[j:j + m] = qs[:m]
        info = (code, j, j + m, psi)
        return phi, info

    # locate the half level with a provisional launch at the left edge, then re-aim
    P = z0
    for _ in range(8):
        phi, info = trajectory(P)
        valid = np.flatnonzero(phi[: info[2]] < 0.5) if info else np.array([], int)
        if valid.size == 0:
            raise FrontError("trajectory never reaches 1/2 inside the span; widen z_span")
        k = valid[0]
        zk = z[k - 1] + (phi[k - 1] - 0.5) / (phi[k - 1] - phi[k]) * dzs
        if abs(zk) < 1e-13:
            break
        P -= zk
    phi, (code, j, end, psi) = trajectory(P)
    # refine with a Newton step on the exact node value at z = 0
    i0 = int(round(-z0 / dzs))
    if abs(z[i0]) < 1e-9 * dzs and np.isfinite(psi[i0]) and psi[i0] != 0:
        for _ in range(4):
            err = phi[i0] - 0.5
            if abs(err) < 1e-14:
                break
            P -= err / psi[i0]
            phi, (code, j, end, psi) = trajectory(P)

    phi = _patch_tail(integ, c, z, phi, psi, code, end)
    left_ok = abs(1.0 - phi[0]) <= 1e-6
    right_ok = abs(phi[-1]) <= 1e-6
    return FrontProfile(speed=float(c), z=z, phi=phi, limits=(bool(left_ok), bool(right_ok)))


def _patch_tail(sh: _Shooter, c, z, phi, psi, code, end):
    n = len(z)
    tail_needed = end < n or code != 0 or np.any(phi[:end] <= 0) or np.any(np.diff(phi[:end]) >= 0)
    if not tail_needed:
        return phi
    modes = sh.bottom_modes(c)
    if sh.d_bottom > 0 or modes is None:
        raise FrontError(f"profile leaves (0, 1) at c = {c:g}: speed below the minimal speed "
                         "(profile oscillates below 0)")
    mu_u, mu_s = modes
    # first sample from which the reaction is linear to 1e-12 near the lower state
    g = eval_f(sh.spec, sh.lo + sh.width * phi[:end]) / sh.width
    lin_err = np.abs(g - sh.d_bottom * phi[:end])
    ok = (phi[:end] > 0) & (lin_err <= 1e-12) & (phi[:end] < 0.5)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        raise FrontError(f"profile leaves (0, 1) before reaching the linear tail at c = {c:g}")
    k = int(idx[0])
    p, q = phi[k], psi[k]
    alpha = (q - mu_s * p) / (mu_u - mu_s)
    beta = p - alpha
    out = phi.copy()
    out[k:] = beta * np.exp(mu_s * (z[k:] - z[k]))
    if beta <= 0:
        raise FrontError("degenerate tail while sampling the profile")
    return out


# diagnostics ------------------------------------------------------------------

@dataclass(frozen=True)
class DecayDiagnostic:
    constant: float
    drift: float
    flagged: bool


def decay_diagnostic(profile: FrontProfile, c_star: float, window=None) -> DecayDiagnostic:
    """Limit of phi(z) / (z exp(-c* z / 2)) over the last tenth of the sampled range.

    A relative drift above 10% across the window is flagged: minimal KPP fronts have a
    finite positive limit, faster ones decay at a different exponential rate.
    """
    z, p = profile.z, profile.phi
    if window is None:
        window = (z[-1] - 0.1 * (z[-1] - z[0]), z[-1])
    sel = (z >= window[0]) & (z <= window[1]) & (z > 0)
    if sel.sum() < 2:
        raise ValueError("decay window holds fewer than two samples")
    r = p[sel] / (z[sel] * np.exp(-0.5 * c_star * z[sel]))
    const = float(r[-1])
    drift = float((r.max() - r.min()) / abs(const)) if const != 0 else math.inf
    return DecayDiagnostic(constant=const, drift=drift, flagged=bool(drift > 0.10))


def stage_speeds(spec: ReactionSpec, tol: float = 1e-6):
    """Speeds (c1, c2) of the sub-fronts b -> 0 and 1 -> b of a tristable reaction."""
    if spec.kind != "tristable":
        raise ValueError("stage speeds are defined for tristable reactions")
    b = spec.params[1]
    c1, _ = shoot_front_speed(spec, tol, states=(0.0, b), require_invasion=False, profile=False)
    c2, _ = shoot_front_speed(spec, tol, states=(b, 1.0), require_invasion=False, profile=False)
    return c1, c2


def tristable_front_condition(spec: ReactionSpec, tol: float = 1e-6) -> dict:
    """Stage speeds of a tristable reaction and whether a single front or a terrace forms.

    A single invading front needs c1 < c2 and a positive integral of f over [0, 1]; with
    c1 > c2 the two stages separate into a terrace.
    """
    c1, c2 = stage_speeds(spec, tol)
    _, ints, _ = trailing_integrals(spec, 200)
    return {"c1": c1, "c2": c2, "integral": float(ints[0]),
            "single_front": bool(c1 < c2 and ints[0] > 0), "terrace": bool(c1 > c2)}
