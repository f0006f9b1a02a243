"""Initial supports U, their asymptotic direction sets, spreading envelopes and distances.

Points are arrays with the last coordinate x_N; in two dimensions a point is (x', x_N) and a
unit direction at angle theta is e = (cos theta, sin theta), so e_N = sin theta.
Subgraph supports are radially symmetric in x': gamma is a function of |x'|.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

TWO_PI = 2.0 * math.pi
ANGLE_GRID = 1440


# gamma families ---------------------------------------------------------------------------

def _sqrt_sine_cap():
    # cubic a + b r^2 + c r^3 matching value, slope and curvature of sqrt(r) sin sqrt(r) at r = 1
    s1, c1 = math.sin(1.0), math.cos(1.0)
    v, d1, d2 = s1, 0.5 * (s1 + c1), 0.25 * (c1 - 2.0 * s1)
    m = np.array([[1.0, 1.0, 1.0], [0.0, 2.0, 3.0], [0.0, 2.0, 6.0]])
    return np.linalg.solve(m, np.array([v, d1, d2]))


_CAP = _sqrt_sine_cap()


@dataclass(frozen=True)
class GammaSpec:
    """gamma(x') as a function of r = |x'|.

    families: linear(alpha), log_coercive(beta), bounded(c), sqrt_sine(),
    conical(ell, core), radial_profile(r_i, g_i).
    """

    family: str
    params: tuple = ()

    FAMILIES = ("linear", "log_coercive", "bounded", "sqrt_sine", "conical", "radial_profile")

    def __post_init__(self):
        if self.family not in self.FAMILIES:
            raise ValueError(f"unknown gamma family {self.family!r}")
        p = self.params
        need = {"linear": 1, "log_coercive": 1, "bounded": 1, "sqrt_sine": 0, "conical": 2}
        if self.family in need and len(p) != need[self.family]:
            raise ValueError(f"{self.family} takes {need[self.family]} parameter(s)")
        if self.family == "conical" and not (p[0] > 0 and p[1] > 0):
            raise ValueError("conical gamma needs ell > 0 and core > 0")
        if self.family == "radial_profile":
            r, g = np.asarray(p[0], float), np.asarray(p[1], float)
            if r.size < 2 or r.size != g.size or r[0] != 0 or np.any(np.diff(r) <= 0):
                raise ValueError("radial_profile needs increasing radii from 0 and matching values")
            object.__setattr__(self, "params", (tuple(r), tuple(g)))
        if not all(np.all(np.isfinite(np.asarray(v, float))) for v in self.params):
            raise ValueError("gamma parameters must be finite")

    @classmethod
    def linear(cls, alpha):
        return cls("linear", (float(alpha),))

    @classmethod
    def log_coercive(cls, beta):
        return cls("log_coercive", (float(beta),))

    @classmethod
    def bounded(cls, c):
        return cls("bounded", (float(c),))

    @classmethod
    def sqrt_sine(cls):
        return cls("sqrt_sine")

    @classmethod
    def conical(cls, ell, core=1.0):
        return cls("conical", (float(ell), float(core)))

    @classmethod
    def radial_profile(cls, radii, values):
        return cls("radial_profile", (tuple(radii), tuple(values)))

    @classmethod
    def from_dict(cls, d):
        fam = d["family"]
        if fam == "radial_profile":
            return cls.radial_profile(d["radii"], d["values"])
        keys = {"linear": ("alpha",), "log_coercive": ("beta",), "bounded": ("c",),
                "sqrt_sine": (), "conical": ("ell", "core")}[fam]
        return cls(fam, tuple(float(d[k]) for k in keys))

    def to_dict(self):
        if self.family == "radial_profile":
            return {"family": self.family, "radii": list(self.params[0]),
                    "values": list(self.params[1])}
        keys = {"linear": ("alpha",), "log_coercive": ("beta",), "bounded": ("c",),
                "sqrt_sine": (), "conical": ("ell", "core")}[self.family]
        return {"family": self.family, **dict(zip(keys, self.params))}

    def __call__(self, xp):
        r = np.abs(np.asarray(xp, dtype=float))
        fam, p = self.family, self.params
        if fam == "linear":
            out = p[0] * r
        elif fam == "log_coercive":
            out = p[0] * np.log1p(r)
        elif fam == "bounded":
            out = np.full_like(r, p[0])
        elif fam == "sqrt_sine":
            s = np.sqrt(np.maximum(r, 1.0))
            cap = _CAP[0] + _CAP[1] * r**2 + _CAP[2] * r**3
            out = np.where(r >= 1.0, s * np.sin(s), cap)
        elif fam == "conical":
            ell, core = p
            # C^1 quadratic cap on |x'| < core
            out = np.where(r >= core, -ell * r, -ell * (0.5 * core + 0.5 * r**2 / core))
        else:
            rr, gg = np.asarray(p[0]), np.asarray(p[1])
            slope = (gg[-1] - gg[-2]) / (rr[-1] - rr[-2])
            out = np.where(r <= rr[-1], np.interp(r, rr, gg), gg[-1] + slope * (r - rr[-1]))
        if out.ndim == 0:
            return float(out)
        return out

    @property
    def lipschitz(self) -> float:
        fam, p = self.family, self.params
        if fam == "linear":
            return abs(p[0])
        if fam == "log_coercive":
            return abs(p[0])
        if fam == "bounded":
            return 0.0
        if fam == "conical":
            return p[0]
        if fam == "sqrt_sine":
            # |d/dr sqrt(r) sin sqrt(r)| = |sin s / (2 s) + cos s / 2| <= 1 for s >= 1
            r = np.linspace(0.0, 4.0, 40001)
            g = self(r)
            return float(max(np.max(np.abs(np.diff(g)) / (r[1] - r[0])), 1.0))
        rr, gg = np.asarray(p[0]), np.asarray(p[1])
        return float(np.max(np.abs(np.diff(gg) / np.diff(rr))))

    @property
    def asymptotic_slope(self) -> float:
        """Limit of gamma(x')/|x'| as |x'| -> infinity (may be +-inf)."""
        fam, p = self.family, self.params
        if fam == "linear":
            return p[0]
        if fam == "conical":
            return -p[0]
        if fam == "radial_profile":
            rr, gg = p
            return (gg[-1] - gg[-2]) / (rr[-1] - rr[-2])
        return 0.0


# direction sets ---------------------------------------------------------------------------------

def _wrap(theta):
    return np.mod(theta, TWO_PI)


@dataclass(frozen=True)
class DirectionSet:
    """Subset of the unit circle as a union of arcs [a, b] with 0 <= a < 2 pi and b <= a + 2 pi.

    An arc with b > 2 pi wraps through the angle 0.

    ``closed`` says whether arc endpoints belong to the set. ``latitude`` optionally gives the
    equivalent description {e : e_N <= latitude} (closed) or {e_N > latitude} (open) used for
    radially symmetric sets in higher dimension.
    """

    arcs: tuple = ()
    closed: bool = True
    latitude: Optional[float] = None
    note: str = ""

    @classmethod
    def empty(cls, closed=True):
        return cls((), closed)

    @classmethod
    def full(cls, closed=True):
        return cls(((0.0, TWO_PI),), closed)

    @property
    def is_empty(self) -> bool:
        return len(self.arcs) == 0

    def contains(self, theta) -> np.ndarray:
        t = _wrap(np.asarray(theta, dtype=float))
        out = np.zeros(t.shape, dtype=bool)
        for a, b in self.arcs:
            if b - a >= TWO_PI:
                out |= True
                continue
            if self.closed:
                hit = (t >= a - 1e-12) & (t <= b + 1e-12)
                hit |= (t + TWO_PI >= a - 1e-12) & (t + TWO_PI <= b + 1e-12)
                # 0 and 2 pi are the same direction
                if b >= TWO_PI - 1e-12:
                    hit |= t <= 1e-12
                if a <= 1e-12:
                    hit |= t >= TWO_PI - 1e-12
            else:
                hit = (t > a + 1e-12) & (t < b - 1e-12)
                hit |= (t + TWO_PI > a + 1e-12) & (t + TWO_PI < b - 1e-12)
            out |= hit
        return out

    def contains_vector(self, e) -> np.ndarray:
        e = np.atleast_2d(np.asarray(e, float))
        if e.shape[1] != 2:
            if self.latitude is None:
                raise ValueError("this direction set is only described in two dimensions")
            return e[:, -1] <= self.latitude if self.closed else e[:, -1] > self.latitude
        return self.contains(np.arctan2(e[:, 1], e[:, 0]))

    def angular_distance(self, theta) -> np.ndarray:
        """Angle from theta to the closure of the set (pi if the set is empty)."""
        t = _wrap(np.asarray(theta, dtype=float))
        if self.is_empty:
            return np.full(t.shape, math.pi)
        best = np.full(t.shape, math.pi)
        for a, b in self.arcs:
            if b - a >= TWO_PI:
                return np.zeros(t.shape)
            inside = ((t >= a) & (t <= b)) | ((t + TWO_PI >= a) & (t + TWO_PI <= b))
            da = np.abs(_wrap(t - a + math.pi) - math.pi)
            db = np.abs(_wrap(t - b + math.pi) - math.pi)
            best = np.minimum(best, np.where(inside, 0.0, np.minimum(da, db)))
        return best

    def complement(self) -> "DirectionSet":
        closed = not self.closed
        if self.is_empty:
            return DirectionSet.full(closed)
        if any(b - a >= TWO_PI for a, b in self.arcs):
            return DirectionSet.empty(closed)
        eps = 1e-12
        # walk once around the circle from the first arc start; when the complement is
        # closed, endpoints shared by two open arcs remain in it as single-point arcs
        arcs = sorted(self.arcs)
        start = arcs[0][0]
        gaps = []
        prev = arcs[0][1]
        for a, b in arcs[1:] + [(start + TWO_PI, start + TWO_PI)]:
            if a > prev + eps or (closed and a >= prev - eps):
                gaps.append((prev, max(a, prev)))
            prev = max(prev, b)
        # arcs that wrap past the starting point cover the beginning of the walk
        cut = prev - TWO_PI
        out = []
        for g0, g1 in gaps:
            if g1 < cut - eps or (not closed and g1 <= cut + eps):
                continue
            g0 = max(g0, cut) if g0 < cut else g0
            if g0 >= TWO_PI:
                g0, g1 = g0 - TWO_PI, g1 - TWO_PI
            out.append((g0, max(g1, g0)))
        return DirectionSet(tuple(sorted(out)), closed, self.latitude)

    def measure(self) -> float:
        return float(sum(b - a for a, b in self.arcs))

    def to_dict(self):
        return {"arcs": [list(a) for a in self.arcs], "closed": self.closed,
                "latitude": self.latitude, "note": self.note}


def _below_slope_set(alpha: float) -> DirectionSet:
    """{e : e_N <= alpha |e'|} in two dimensions."""
    if alpha == math.inf:
        return DirectionSet.full(True)
    if alpha == -math.inf:
        return DirectionSet(((1.5 * math.pi, 1.5 * math.pi),), True, -1.0)
    phi = math.atan(alpha)
    lat = math.sin(phi)
    # right branch theta in [-pi/2, phi], left branch theta in [pi - phi, 3 pi / 2]
    arcs = [(math.pi - phi, TWO_PI)]
    if phi >= 0:
        arcs.append((0.0, phi))
    else:
        arcs = [(math.pi - phi, TWO_PI + phi)]
    return DirectionSet(tuple(sorted(arcs)), True, lat)


# supports ---------------------------------------------------------------------------------

VARIANTS = ("subgraph", "ball", "half_space", "cone", "v_shape", "annuli_union", "custom")


@dataclass(frozen=True)
class SupportSpec:
    variant: str
    gamma: Optional[GammaSpec] = None
    center: tuple = ()
    radius: float = 0.0
    normal: tuple = ()
    offset: float = 0.0
    alpha: float = 0.0
    n_max: int = 0
    predicate: Optional[Callable] = field(default=None, compare=False, repr=False)
    bbox: tuple = ()
    distance: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown support variant {self.variant!r}")
        if self.variant == "subgraph" and self.gamma is None:
            raise ValueError("subgraph support needs a gamma")
        if self.variant == "ball" and not self.radius > 0:
            raise ValueError("ball radius must be positive")
        if self.variant == "half_space":
            n = np.asarray(self.normal, float)
            if n.size == 0 or not np.linalg.norm(n) > 0:
                raise ValueError("half_space needs a nonzero normal")
        if self.variant == "annuli_union" and self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        if self.variant == "custom" and self.predicate is None:
            raise ValueError("custom support needs an indicator predicate")

    # constructors
    @classmethod
    def subgraph(cls, gamma: GammaSpec):
        return cls("subgraph", gamma=gamma)

    @classmethod
    def ball(cls, center, radius):
        return cls("ball", center=tuple(float(c) for c in np.atleast_1d(center)), radius=float(radius))

    @classmethod
    def half_space(cls, normal, offset=0.0):
        n = np.asarray(normal, float)
        n = n / np.linalg.norm(n)
        return cls("half_space", normal=tuple(n), offset=float(offset))

    @classmethod
    def cone(cls, alpha):
        """{x : x_N <= alpha |x'|}."""
        return cls("cone", alpha=float(alpha))

    @classmethod
    def v_shape(cls, beta):
        """{x : x_N <= |x'| cot(beta)}, the region below a V of half-opening beta."""
        if not 0 < beta < math.pi / 2:
            raise ValueError("v_shape angle must lie in (0, pi/2)")
        return cls("v_shape", alpha=float(beta))

    @classmethod
    def annuli_union(cls, n_max=12):
        """Union over n = 0..n_max of the closed annuli 2^n - 1 <= |x| <= 2^n + 1."""
        return cls("annuli_union", n_max=int(n_max))

    @classmethod
    def custom(cls, predicate, bbox, distance=None):
        return cls("custom", predicate=predicate, bbox=tuple(tuple(b) for b in bbox),
                   distance=distance)

    @classmethod
    def from_dict(cls, d):
        v = d["variant"]
        if v == "subgraph":
            return cls.subgraph(GammaSpec.from_dict(d["gamma"]))
        if v == "ball":
            return cls.ball(d["center"], d["radius"])
        if v == "half_space":
            return cls.half_space(d["normal"], d.get("offset", 0.0))
        if v == "cone":
            return cls.cone(d["alpha"])
        if v == "v_shape":
            return cls.v_shape(d["beta"])
        if v == "annuli_union":
            return cls.annuli_union(d.get("n_max", 12))
        raise ValueError(f"support variant {v!r} cannot be built from a config")

    def to_dict(self):
        v = self.variant
        if v == "subgraph":
            return {"variant": v, "gamma": self.gamma.to_dict()}
        if v == "ball":
            return {"variant": v, "center": list(self.center), "radius": self.radius}
        if v == "half_space":
            return {"variant": v, "normal": list(self.normal), "offset": self.offset}
        if v == "cone":
            return {"variant": v, "alpha": self.alpha}
        if v == "v_shape":
            return {"variant": v, "beta": self.alpha}
        if v == "annuli_union":
            return {"variant": v, "n_max": self.n_max}
        return {"variant": v, "bbox": [list(b) for b in self.bbox]}

    # structure helpers
    def as_gamma(self) -> Optional[GammaSpec]:
        """gamma when U is a subgraph {x_N <= gamma(|x'|)}, else None."""
        if self.variant == "subgraph":
            return self.gamma
        if self.variant == "cone":
            return GammaSpec.linear(self.alpha)
        if self.variant == "v_shape":
            return GammaSpec.linear(1.0 / math.tan(self.alpha))
        if self.variant == "half_space":
            n = np.asarray(self.normal)
            if np.allclose(n[:-1], 0.0) and n[-1] > 0:
                return GammaSpec.bounded(self.offset / n[-1])
        return None

    def column_profile(self):
        """('subgraph', gamma) or ('ball', radius) when columns can be filled exactly."""
        g = self.as_gamma()
        if g is not None:
            return ("subgraph", g)
        if self.variant == "ball":
            return ("ball", self.radius)
        return None

    def center_1d(self) -> float:
        return self.center[0] if self.center else 0.0

    # membership
    def indicator(self, x) -> bool:
        return bool(self.indicator_grid(np.atleast_2d(np.asarray(x, float)))[0])

    def indicator_grid(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, float))
        v = self.variant
        g = self.as_gamma()
        if g is not None and v != "half_space":
            xp = np.linalg.norm(pts[:, :-1], axis=1)
            return pts[:, -1] <= g(xp)
        if v == "ball":
            c = np.asarray(self.center, float)
            if c.size == 1 and pts.shape[1] > 1:
                c = np.zeros(pts.shape[1])
            return np.linalg.norm(pts - c, axis=1) <= self.radius
        if v == "half_space":
            n = np.asarray(self.normal)
            return pts @ n <= self.offset
        if v == "annuli_union":
            r = np.linalg.norm(pts, axis=1)
            out = np.zeros(len(pts), dtype=bool)
            for k in range(self.n_max + 1):
                out |= (r >= 2.0**k - 1.0) & (r <= 2.0**k + 1.0)
            return out
        return np.array([bool(self.predicate(p)) for p in pts])


# distances ---------------------------------------------------------------------------------------

class DistanceError(RuntimeError):
    pass


def _subgraph_distance(gamma: GammaSpec, xp: float, z: float, tol: float = 1e-6) -> float:
    """Distance from (x', z) (|x'| = xp in the meridian plane) to {x_N <= gamma(|x'|)}."""
    g0 = gamma(xp)
    if z <= g0:
        return 0.0
    d0 = z - g0
    if gamma.family == "linear":
        a = gamma.params[0]
        t = (xp + a * z) / (1.0 + a * a)
        if t >= 0:
            return (z - a * xp) / math.sqrt(1.0 + a * a)
        return math.hypot(xp, z)  # apex of a convex cone

    def sq(y):
        # y is a signed abscissa on the x' line through the point
        return (y - xp) ** 2 + max(z - gamma(abs(y)), 0.0) ** 2

    prev = None
    m = 2001
    for _ in range(6):
        ys = np.linspace(xp - d0, xp + d0, m)
        vals = (ys - xp) ** 2 + np.maximum(z - gamma(np.abs(ys)), 0.0) ** 2
        i = int(np.argmin(vals))
        step = ys[1] - ys[0]
        res = minimize_scalar(sq, bounds=(ys[max(i - 1, 0)], ys[min(i + 1, m - 1)]),
                              method="bounded", options={"xatol": 1e-12})
        best = math.sqrt(min(res.fun, vals[i]))
        if prev is not None and abs(best - prev) <= tol:
            return best
        prev = best
        m = 2 * m - 1
    raise DistanceError(f"distance search did not settle near x' in [{xp - d0:g}, {xp + d0:g}]")


def dist_to_support(support: SupportSpec, x, tol: float = 1e-6) -> float:
    """Euclidean distance from the point x to U (0 inside the closure)."""
    x = np.asarray(x, dtype=float).ravel()
    v = support.variant
    if v == "ball":
        c = np.asarray(support.center, float)
        if c.size != x.size:
            c = np.zeros(x.size)
        return max(float(np.linalg.norm(x - c)) - support.radius, 0.0)
    if v == "half_space":
        return max(float(x @ np.asarray(support.normal)) - support.offset, 0.0)
    if v == "annuli_union":
        r = float(np.linalg.norm(x))
        return min(max(abs(r - 2.0**k) - 1.0, 0.0) for k in range(support.n_max + 1))
    g = support.as_gamma()
    if g is not None:
        xp = float(np.linalg.norm(x[:-1]))
        return _subgraph_distance(g, xp, float(x[-1]), tol)
    if support.distance is not None:
        return float(support.distance(x))
    return _sampled_distance(support, x)


def _sampled_distance(support: SupportSpec, x, n_dir: int = 720) -> float:
    if support.indicator(x):
        return 0.0
    span = max(hi - lo for lo, hi in support.bbox)
    far = np.linalg.norm(x) + 2.0 * span
    ang = np.linspace(0.0, TWO_PI, n_dir, endpoint=False)
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    radii = np.geomspace(1e-3, far, 400)
    for r in radii:
        if np.any(support.indicator_grid(x + r * ring)):
            lo = r / radii[1] * radii[0] if r != radii[0] else 0.0
            return float(0.5 * (lo + r))
    return math.inf


def dist_to_support_many(support: SupportSpec, pts, tol: float = 1e-6) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(pts, float))
    v = support.variant
    if v == "ball":
        c = np.asarray(support.center, float)
        if c.size != pts.shape[1]:
            c = np.zeros(pts.shape[1])
        return np.maximum(np.linalg.norm(pts - c, axis=1) - support.radius, 0.0)
    if v == "half_space":
        return np.maximum(pts @ np.asarray(support.normal) - support.offset, 0.0)
    g = support.as_gamma()
    if g is not None and g.family == "linear":
        a = g.params[0]
        xp = np.linalg.norm(pts[:, :-1], axis=1)
        z = pts[:, -1]
        t = xp + a * z
        d = np.where(t >= 0, (z - a * xp) / math.sqrt(1 + a * a), np.hypot(xp, z))
        return np.where(z <= a * xp, 0.0, d)
    return np.array([dist_to_support(support, p, tol) for p in pts])


# direction sets and envelope ---------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionReport:
    U: DirectionSet
    B: DirectionSet
    method: str
    indeterminate: tuple = ()  # angles (numeric path) left unclassified

    @property
    def covers(self) -> bool:
        """Whether B and U together cover the circle."""
        th = np.linspace(0.0, TWO_PI, 4 * ANGLE_GRID, endpoint=False)
        return bool(np.all(self.U.contains(th) | self.B.contains(th)))


def direction_sets(support: SupportSpec, numeric: bool = False, **kw) -> DirectionReport:
    """(U, B): directions along which U is asymptotically present / absent."""
    if not numeric:
        g = support.as_gamma()
        v = support.variant
        if g is not None:
            U = _below_slope_set(g.asymptotic_slope)
            return DirectionReport(U, U.complement(), "analytic")
        if v == "half_space":
            n = np.asarray(support.normal, float)
            if n.size == 2:
                a = math.atan2(n[1], n[0])
                lo = _wrap(a + 0.5 * math.pi)
                arcs = [(lo, lo + math.pi)] if lo + math.pi <= TWO_PI else [
                    (0.0, lo + math.pi - TWO_PI), (lo, TWO_PI)]
                U = DirectionSet(tuple(sorted(arcs)), True)
                return DirectionReport(U, U.complement(), "analytic")
        if v == "ball":
            return DirectionReport(DirectionSet.empty(True), DirectionSet.full(False), "analytic")
        if v == "annuli_union":
            # dist(tau xi, U)/tau oscillates between 0 and about 1/3: neither limit exists
            return DirectionReport(DirectionSet.empty(True), DirectionSet.empty(False),
                                   "analytic")
    return numeric_direction_sets(support, **kw)


def numeric_direction_sets(support: SupportSpec, n_angles: int = 360, tau0: float = 1.0,
                           octaves: int = 12, small: float = 0.02, large: float = 0.05,
                           tail: int = 5) -> DirectionReport:
    """Classify directions from samples of dist(tau xi, U)/tau at tau = tau0 2^(k/2).

    Interleaved half-octaves expose oscillating ratios. A direction is put in U when all
    tail ratios are below ``small``, in B when all exceed ``large``; directions with both
    small and large tail ratios belong to neither; the rest are indeterminate.
    """
    th = (np.arange(n_angles) + 0.5) * TWO_PI / n_angles
    taus = tau0 * 2.0 ** (np.arange(2 * octaves + 1) / 2.0)
    cls = np.empty(n_angles, dtype=object)
    for i, t in enumerate(th):
        e = np.array([math.cos(t), math.sin(t)])
        ratios = np.array([dist_to_support(support, tau * e) / tau for tau in taus])
        r = ratios[-tail:]
        if np.all(r < small):
            cls[i] = "U"
        elif np.all(r > large):
            cls[i] = "B"
        elif np.any(r < small) and np.any(r > large):
            cls[i] = "neither"
        else:
            cls[i] = "?"
    step = TWO_PI / n_angles

    def arcs_of(label):
        out = []
        for i in range(n_angles):
            if cls[i] == label:
                a, b = i * step, (i + 1) * step
                if out and abs(out[-1][1] - a) < 1e-12:
                    out[-1] = (out[-1][0], b)
                else:
                    out.append((a, b))
        return tuple(out)

    U = DirectionSet(arcs_of("U"), True, note="numeric")
    B = DirectionSet(arcs_of("B"), False, note="numeric")
    undecided = tuple(float(t) for t, c in zip(th, cls) if c == "?")
    return DirectionReport(U, B, "numeric", undecided)


@dataclass(frozen=True)
class Envelope:
    theta: np.ndarray
    w: np.ndarray
    c_star: float
    U: DirectionSet

    @property
    def unbounded(self) -> np.ndarray:
        return ~np.isfinite(self.w)

    def contains(self, pts) -> np.ndarray:
        """Membership in the open set W = R+ U + B_{c*}."""
        pts = np.atleast_2d(np.asarray(pts, float))
        return envelope_distance(self.U, pts) < self.c_star

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["theta", "w"])
            for t, w in zip(self.theta, self.w):
                wr.writerow([repr(float(t)), repr(float(w))])


def envelope_distance(U: DirectionSet, pts) -> np.ndarray:
    """Distance from points to the cone R+ U (to the origin when U is empty)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    r = np.linalg.norm(pts, axis=1)
    th = np.arctan2(pts[:, 1], pts[:, 0])
    d = U.angular_distance(th)
    return np.where(d >= 0.5 * math.pi, r, r * np.sin(d))


def envelope_w(support: SupportSpec, c_star: float, n_angles: int = ANGLE_GRID,
               directions: Optional[DirectionReport] = None) -> Envelope:
    """w(e) = c*/dist(e, R+ U) on a uniform angle grid, with w = c* away from U."""
    rep = directions or direction_sets(support)
    th = np.arange(n_angles) * TWO_PI / n_angles
    d = rep.U.angular_distance(th)
    with np.errstate(divide="ignore"):
        w = np.where(d >= 0.5 * math.pi, c_star, c_star / np.sin(d))
    w = np.where(d <= 1e-15, np.inf, w)
    return Envelope(th, w, float(c_star), rep.U)


# erosion and clouds ---------------------------------------------------------------------------

def sample_grid(bbox, h):
    axes = [np.arange(lo, hi + 0.5 * h, h) for lo, hi in bbox]
    mesh = np.meshgrid(*axes, indexing="ij")
    return axes, np.stack([m.ravel() for m in mesh], axis=1)


def erode(support: SupportSpec, delta: float, h: float, bbox) -> np.ndarray:
    """Grid points of U at distance >= delta from the complement of U (a point cloud)."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    if h > delta / 4 + 1e-15:
        raise ValueError("sampling step must be at most delta/4")
    pad = delta + 2 * h
    big = [(lo - pad, hi + pad) for lo, hi in bbox]
    axes, pts = sample_grid(big, h)
    shape = tuple(len(a) for a in axes)
    inside = support.indicator_grid(pts).reshape(shape)
    dist = ndimage.distance_transform_edt(inside, sampling=h)
    keep = inside & (dist >= delta - 1e-12)
    sel = np.ones(len(pts), dtype=bool)
    for k, (lo, hi) in enumerate(bbox):
        sel &= (pts[:, k] >= lo - 1e-12) & (pts[:, k] <= hi + 1e-12)
    return pts[keep.ravel() & sel]


def erode_bruteforce(support: SupportSpec, delta: float, h: float, bbox) -> np.ndarray:
    """Same as erode, with distances to the sampled complement computed exhaustively."""
    pad = delta + 2 * h
    big = [(lo - pad, hi + pad) for lo, hi in bbox]
    _, pts = sample_grid(big, h)
    inside = support.indicator_grid(pts)
    comp = pts[~inside]
    cand = pts[inside]
    for k, (lo, hi) in enumerate(bbox):
        cand = cand[(cand[:, k] >= lo - 1e-12) & (cand[:, k] <= hi + 1e-12)]
    if comp.size == 0:
        return cand
    keep = np.array([np.min(np.sum((comp - p) ** 2, axis=1)) >= (delta - 1e-12) ** 2 for p in cand],
                    dtype=bool)
    return cand[keep] if cand.size else cand


# Hausdorff distance -------------------------------------------------------------------------------

def _directed_brute(A, B, chunk=2048):
    best = 0.0
    for i in range(0, len(A), chunk):
        a = A[i:i + chunk]
        d2 = np.min(((a[:, None, :] - B[None, :, :]) ** 2).sum(axis=2), axis=1)
        best = max(best, float(np.sqrt(d2.max())))
    return best


def _directed_tree(A, B):
    d, _ = cKDTree(B).query(A, k=1)
    return float(d.max())


def hausdorff(A, B, method: str = "auto") -> float:
    """Hausdorff distance between finite point clouds (0 for two empty, inf for one empty)."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    ea, eb = A.size == 0, B.size == 0
    if ea and eb:
        return 0.0
    if ea or eb:
        return math.inf
    A = A.reshape(len(A), -1)
    B = B.reshape(len(B), -1)
    if method == "auto":
        method = "brute" if len(A) * len(B) <= 4_000_000 else "tree"
    if method == "brute":
        return max(_directed_brute(A, B), _directed_brute(B, A))
    if method == "tree":
        return max(_directed_tree(A, B), _directed_tree(B, A))
    raise ValueError(f"unknown method {method!r}")


def cloud_to_csv(points, path) -> None:
    pts = np.atleast_2d(np.asarray(points, float))
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x{i + 1}" for i in range(pts.shape[1])] if pts.size else ["x1"])
        for p in pts:
            wr.writerow([repr(float(v)) for v in p])
