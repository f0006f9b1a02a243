"""Finite differences for u_t = Laplacian(u) + f(u) on truncated grids.

Geometries: ``line`` (x), ``radial`` (r = |x| in dimension N), ``plane`` (x', x_N) and
``cylinder`` (r = |x'|, x_N) in dimension N. The last grid axis is the propagation axis;
the co-moving frame shifts along it by whole cells. Grids are vertex-centred: node j of an
axis sits at lo + j h and stands for the cell [x_j - h/2, x_j + h/2].
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import time as _time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ._backend import kernels, NAME as BACKEND
from .reaction import ReactionSpec, reaction_flow

GEOMETRIES = ("line", "radial", "plane", "cylinder")
SCHEMES = ("explicit_euler", "strang_split")
BC_CODES = {"dirichlet": 0, "neumann": 1, "axis": 2}


class StabilityError(ValueError):
    pass


class WindowTooSmall(RuntimeError):
    pass


class SolverFault(RuntimeError):
    pass


@dataclass(frozen=True)
class Boundary:
    kind: str
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in BC_CODES:
            raise ValueError(f"unknown boundary kind {self.kind!r}")

    @classmethod
    def dirichlet(cls, value: float) -> "Boundary":
        return cls("dirichlet", float(value))

    @classmethod
    def neumann(cls) -> "Boundary":
        return cls("neumann")

    @classmethod
    def axis(cls) -> "Boundary":
        return cls("axis")

    @property
    def code(self) -> int:
        return BC_CODES[self.kind]

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


def _bc(obj) -> Boundary:
    if isinstance(obj, Boundary):
        return obj
    if isinstance(obj, str):
        return Boundary(obj)
    return Boundary(obj["kind"], float(obj.get("value", 0.0)))


@dataclass(frozen=True)
class Domain:
    geometry: str
    extents: tuple
    h: tuple
    bcs: tuple
    dim: int = 1

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        naxes = 1 if self.geometry in ("line", "radial") else 2
        ext = tuple((float(a), float(b)) for a, b in self.extents)
        hs = tuple(float(v) for v in self.h)
        bcs = tuple((_bc(a), _bc(b)) for a, b in self.bcs)
        if not (len(ext) == len(hs) == len(bcs) == naxes):
            raise ValueError(f"{self.geometry} domain needs {naxes} axes")
        for (lo, hi), h in zip(ext, hs):
            if not hi > lo:
                raise ValueError("empty extent")
            if not h > 0:
                raise ValueError("spacing must be positive")
            cells = (hi - lo) / h
            if abs(cells - round(cells)) > 1e-6:
                raise ValueError(f"extent {hi - lo:g} is not a whole number of cells of {h:g}")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "h", hs)
        object.__setattr__(self, "bcs", bcs)
        if self.geometry in ("radial", "cylinder"):
            if ext[0][0] != 0.0 or bcs[0][0].kind != "axis":
                raise ValueError("r axis must start at 0 with the symmetry condition")
            if self.dim < 2:
                raise ValueError("radial geometries need N >= 2")
        for i, (lo_bc, hi_bc) in enumerate(bcs):
            if hi_bc.kind == "axis" or (lo_bc.kind == "axis" and not (
                    i == 0 and self.geometry in ("radial", "cylinder"))):
                raise ValueError("the symmetry condition only applies at r = 0")
        if self.geometry == "plane" and self.dim != 2:
            object.__setattr__(self, "dim", 2)
        if self.geometry == "line" and self.dim != 1:
            object.__setattr__(self, "dim", 1)

    # constructors
    @classmethod
    def line(cls, lo, hi, h, lo_bc=Boundary.dirichlet(1.0), hi_bc=Boundary.dirichlet(0.0)):
        return cls("line", ((lo, hi),), (h,), ((lo_bc, hi_bc),), 1)

    @classmethod
    def radial(cls, N, r_max, h, hi_bc=Boundary.dirichlet(0.0)):
        return cls("radial", ((0.0, r_max),), (h,), ((Boundary.axis(), hi_bc),), N)

    @classmethod
    def plane(cls, xp, xn, h, lateral=(Boundary.neumann(), Boundary.neumann()),
              vertical=(Boundary.dirichlet(1.0), Boundary.dirichlet(0.0))):
        hh = (h, h) if np.isscalar(h) else tuple(h)
        return cls("plane", (tuple(xp), tuple(xn)), hh, (tuple(lateral), tuple(vertical)), 2)

    @classmethod
    def cylinder(cls, N, r_max, xn, h, outer=Boundary.neumann(),
                 vertical=(Boundary.dirichlet(1.0), Boundary.dirichlet(0.0))):
        hh = (h, h) if np.isscalar(h) else tuple(h)
        return cls("cylinder", ((0.0, r_max), tuple(xn)), hh,
                   ((Boundary.axis(), outer), tuple(vertical)), N)

    @classmethod
    def from_dict(cls, d):
        return cls(d["geometry"], tuple(tuple(e) for e in d["extents"]), tuple(d["h"]),
                   tuple(tuple(_bc(b) for b in pair) for pair in d["bcs"]), int(d.get("dim", 1)))

    def to_dict(self):
        return {"geometry": self.geometry, "extents": [list(e) for e in self.extents],
                "h": list(self.h), "bcs": [[b.to_dict() for b in pair] for pair in self.bcs],
                "dim": self.dim}

    # grid
    @property
    def shape(self) -> tuple:
        return tuple(int(round((hi - lo) / h)) + 1 for (lo, hi), h in zip(self.extents, self.h))

    @property
    def prop_axis(self) -> int:
        return len(self.extents) - 1

    def coords(self, axis: int) -> np.ndarray:
        lo, _ = self.extents[axis]
        return lo + self.h[axis] * np.arange(self.shape[axis])

    @property
    def metric(self) -> float:
        """Coefficient m of the first-order term (m/r) d/dr on axis 0."""
        if self.geometry == "radial":
            return float(self.dim - 1)
        if self.geometry == "cylinder":
            return float(self.dim - 2)
        return 0.0

    def diag_bound(self) -> float:
        """Largest diagonal weight of the discrete Laplacian (sum over axes of 2 k_i / h_i^2)."""
        tot = 0.0
        for i, h in enumerate(self.h):
            k = 1.0
            if i == 0 and self.bcs[0][0].kind == "axis":
                k = self.metric + 1.0
            tot += 2.0 * k / h**2
        return tot


@dataclass
class Field:
    domain: Domain
    values: np.ndarray
    time: float = 0.0
    frame_offset: int = 0

    def copy(self) -> "Field":
        return Field(self.domain, self.values.copy(), self.time, self.frame_offset)

    def abs_coords(self, axis: int) -> np.ndarray:
        c = self.domain.coords(axis)
        if axis == self.domain.prop_axis:
            c = c + self.frame_offset * self.domain.h[axis]
        return c

    def boundaries(self):
        """Boundary conditions in force, accounting for the frame shift."""
        bcs = list(self.domain.bcs)
        ax = self.domain.prop_axis
        lo_bc, hi_bc = bcs[ax]
        if self.frame_offset > 0 and lo_bc.kind == "axis":
            # the origin has left the window; what lies behind is the invaded state
            bcs[ax] = (Boundary.dirichlet(1.0), hi_bc)
        return tuple(bcs)

    def metric_offset(self) -> int:
        """Absolute node index of node 0 on axis 0 (enters the r-dependent weights)."""
        d = self.domain
        k = int(round(d.extents[0][0] / d.h[0]))
        if d.prop_axis == 0:
            k += self.frame_offset
        return k


@dataclass(frozen=True)
class TrackLevel:
    lam: float = 0.5
    trigger_fraction: float = 0.75
    shift_fraction: float = 0.25
    column: object = 0  # column index, or "min" for the slowest column
    tol: float = 1e-8

    def to_dict(self):
        return {"kind": "track_level", "lam": self.lam, "trigger_fraction": self.trigger_fraction,
                "shift_fraction": self.shift_fraction, "column": self.column, "tol": self.tol}


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "explicit_euler"
    dt: object = "auto"
    frame_policy: Optional[TrackLevel] = None
    max_time: float = 0.0
    cadence: float = 1.0
    check_interval: Optional[float] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError("dt must be 'auto' or a positive number")
        if not self.cadence > 0:
            raise ValueError("cadence must be positive")
        if not (self.max_time >= 0 and math.isfinite(self.max_time)):
            raise ValueError("max_time must be finite and nonnegative")

    @classmethod
    def from_dict(cls, d):
        fp = d.get("frame_policy")
        if fp and fp != "off":
            fp = TrackLevel(**{k: v for k, v in fp.items() if k != "kind"})
        else:
            fp = None
        return cls(d.get("scheme", "explicit_euler"), d.get("dt", "auto"), fp,
                   float(d.get("max_time", 0.0)), float(d.get("cadence", 1.0)),
                   d.get("check_interval"))

    def to_dict(self):
        return {"scheme": self.scheme, "dt": self.dt,
                "frame_policy": self.frame_policy.to_dict() if self.frame_policy else "off",
                "max_time": self.max_time, "cadence": self.cadence,
                "check_interval": self.check_interval}


# time step -------------------------------------------------------------------------------

def stability_bound(domain: Domain, spec: ReactionSpec) -> float:
    """Largest explicit dt keeping every stencil weight nonnegative (discrete max principle)."""
    return 1.0 / (domain.diag_bound() + spec.lipschitz)


def auto_dt(domain: Domain, spec: ReactionSpec, scheme: str = "explicit_euler") -> float:
    hmin = min(domain.h)
    lip = max(spec.lipschitz, 1e-300)
    if scheme == "strang_split":
        return min(0.5 * hmin, 1.0 / (2.0 * lip))
    return min(0.2 * hmin**2, stability_bound(domain, spec), 1.0 / (2.0 * lip))


def resolve_steps(domain: Domain, spec: ReactionSpec, config: SolverConfig):
    """(dt, steps per chunk, chunks per observation); dt divides the cadence exactly."""
    dt_max = auto_dt(domain, spec, config.scheme) if config.dt == "auto" else float(config.dt)
    if config.scheme == "explicit_euler" and dt_max > stability_bound(domain, spec) * (1 + 1e-12):
        raise StabilityError("config rejected: stability (dt exceeds the explicit bound "
                             f"{stability_bound(domain, spec):.6g})")
    check = config.check_interval or min(config.cadence, 1.0)
    chunks = max(1, int(math.ceil(config.cadence / check - 1e-9)))
    chunk = config.cadence / chunks
    steps = max(1, int(math.ceil(chunk / dt_max - 1e-9)))
    if config.dt != "auto" and abs(steps * dt_max - chunk) > 1e-9 * chunk:
        raise StabilityError("config rejected: dt must divide the observation cadence")
    return chunk / steps, steps, chunks


# initialization ------------------------------------------------------------------------

def _interval_fraction(lo_edges, hi_edges, a, b):
    """Fraction of each cell [lo, hi] inside [a, b]."""
    ov = np.clip(np.minimum(hi_edges, b) - np.maximum(lo_edges, a), 0.0, None)
    return ov / (hi_edges - lo_edges)


def init_from_support(support, domain: Domain, margin_cells: int = 10, strict: bool = True) -> Field:
    """Indicator of the support on the grid; fractional cells along the propagation axis."""
    from .support import SupportSpec  # noqa: F401  (type only)

    shape = domain.shape
    ax = domain.prop_axis
    h = domain.h[ax]
    x = domain.coords(ax)
    lo_e, hi_e = x - 0.5 * h, x + 0.5 * h
    lo_lim, hi_lim = domain.extents[ax]
    prof = support.column_profile()
    if domain.geometry in ("line", "radial"):
        if domain.geometry == "radial":
            if prof is None or prof[0] != "ball":
                raise ValueError("radial domains take balls centred at the origin")
            _, r = prof
            vals = _interval_fraction(lo_e, hi_e, -r, r)
            edge = r
        else:
            if prof is None:
                vals = support.indicator_grid(x[:, None])
                edge = None
            elif prof[0] == "ball":
                _, r = prof
                c = support.center_1d()
                vals = _interval_fraction(lo_e, hi_e, c - r, c + r)
                edge = None
            else:
                g = float(prof[1](np.zeros(1))[0])
                vals = _interval_fraction(lo_e, hi_e, -np.inf, g)
                edge = g
        # the radial lower end is the symmetry axis, not a boundary
        floor = -np.inf if domain.geometry == "radial" else lo_lim + margin_cells * h
        if strict and edge is not None and not (floor <= edge <= hi_lim - margin_cells * h):
            raise ValueError("support boundary is closer than the margin to the domain edge")
        return Field(domain, np.ascontiguousarray(vals, dtype=float))

    xp = domain.coords(0)
    if prof is not None and prof[0] == "subgraph":
        gam = np.asarray(prof[1](np.abs(xp)), dtype=float)
        if not np.all(np.isfinite(gam)):
            raise ValueError("gamma evaluation failed on the domain")
        if strict and (gam.min() < lo_lim + margin_cells * h or gam.max() > hi_lim - margin_cells * h):
            raise ValueError("support boundary is closer than the margin to the domain edge")
        vals = np.clip((gam[:, None] - lo_e[None, :]) / h, 0.0, 1.0)
    else:
        X0, XN = np.meshgrid(xp, x, indexing="ij")
        pts = np.stack([X0.ravel(), XN.ravel()], axis=1)
        vals = support.indicator_grid(pts).reshape(shape).astype(float)
    return Field(domain, np.ascontiguousarray(vals))


# stepping -------------------------------------------------------------------------------

def _explicit(field: Field, spec: ReactionSpec, dt: float, nsteps: int):
    d = field.domain
    code, par, tab = spec.kernel_params()
    bcs = field.boundaries()
    u = field.values
    if u.ndim == 1:
        (lo, hi), = bcs
        bad = kernels.explicit_steps_1d(u, nsteps, dt, d.h[0], d.metric, field.metric_offset(),
                                        lo.code, lo.value, hi.code, hi.value, code, par, tab)
    else:
        bk = np.array([bcs[0][0].code, bcs[0][1].code, bcs[1][0].code, bcs[1][1].code],
                      dtype=np.int32)
        bv = np.array([bcs[0][0].value, bcs[0][1].value, bcs[1][0].value, bcs[1][1].value])
        bad = kernels.explicit_steps_2d(u, nsteps, dt, d.h[0], d.h[1], d.metric,
                                        field.metric_offset(), bk, bv, code, par, tab)
    if bad:
        raise SolverFault(f"NaN detected near t = {field.time:g}")


def _implicit_factors(n, r, wm, wp, lo: Boundary, hi: Boundary, metric):
    """Thomas factors of (I - dt L) along one axis, plus boundary right-hand-side weights."""
    sub = -r * wm
    diag = np.full(n, 1.0 + 2.0 * r)
    sup = -r * wp
    rhs_lo = rhs_hi = 0.0
    if lo.kind == "axis":
        diag[0] = 1.0 + 2.0 * (metric + 1.0) * r
        sup[0] = -2.0 * (metric + 1.0) * r
    elif lo.kind == "neumann":
        sup[0] = -r * (wm[0] + wp[0])
    else:
        rhs_lo = r * wm[0] * lo.value
    if hi.kind == "neumann":
        sub[-1] = -r * (wm[-1] + wp[-1])
    else:
        rhs_hi = r * wp[-1] * hi.value
    cp = np.empty(n)
    den = np.empty(n)
    den[0] = diag[0]
    cp[0] = sup[0] / den[0]
    for j in range(1, n):
        den[j] = diag[j] - sub[j] * cp[j - 1]
        cp[j] = sup[j] / den[j]
    return sub, cp, den, rhs_lo, rhs_hi


def _implicit_axis(field: Field, dt: float, axis: int):
    d = field.domain
    u = field.values
    u2 = u[None, :] if u.ndim == 1 else (u if axis == 1 else np.ascontiguousarray(u.T))
    n = u2.shape[1]
    metric = d.metric if axis == 0 else 0.0
    off = field.metric_offset() if axis == 0 else 0
    wm, wp = kernels.metric_weights(n, metric, off)
    lo, hi = field.boundaries()[axis]
    r = dt / d.h[axis] ** 2
    sub, cp, den, rl, rh = _implicit_factors(n, r, np.asarray(wm), np.asarray(wp), lo, hi, metric)
    m = u2.shape[0]
    kernels.tridiag_solve_lines(u2, sub, cp, den, np.full(m, rl), np.full(m, rh))
    if u.ndim == 1:
        u[:] = u2[0]
    elif axis == 0:
        u[:] = u2.T


def _strang(field: Field, spec: ReactionSpec, dt: float, nsteps: int, parity: int):
    for k in range(nsteps):
        field.values[...] = reaction_flow(spec, field.values, 0.5 * dt)
        axes = list(range(field.values.ndim))
        if (parity + k) % 2:
            axes.reverse()
        for ax in axes:
            _implicit_axis(field, dt, ax)
        field.values[...] = reaction_flow(spec, field.values, 0.5 * dt)
        if np.isnan(field.values).any():
            raise SolverFault(f"NaN detected near t = {field.time:g}")


def _advance_inplace(field: Field, spec: ReactionSpec, scheme: str, dt: float, nsteps: int,
                     step_index: int = 0):
    if scheme == "explicit_euler":
        _explicit(field, spec, dt, nsteps)
    else:
        _strang(field, spec, dt, nsteps, step_index)


def step(field: Field, spec: ReactionSpec, config: SolverConfig, nsteps: int = 1) -> Field:
    """New field after nsteps time steps of the configured scheme."""
    dt, _, _ = resolve_steps(field.domain, spec, config)
    out = field.copy()
    _advance_inplace(out, spec, config.scheme, dt, nsteps)
    out.time = field.time + nsteps * dt
    return out


# frame shifting ------------------------------------------------------------------------------

def shift_frame(field: Field, cells: int, tol: float = 1e-8) -> Field:
    """Translate the window by ``cells`` along the propagation axis."""
    if cells == 0:
        return field.copy()
    if cells < 0:
        raise ValueError("frame shifts only move forward")
    d = field.domain
    ax = d.prop_axis
    u = field.values
    n = u.shape[ax]
    if cells >= n:
        raise WindowTooSmall("window too small: shift exceeds the window")
    lo_bc, hi_bc = field.boundaries()[ax]
    behind = u[..., :cells]
    up = lo_bc.value if lo_bc.kind == "dirichlet" else 1.0
    if np.max(np.abs(behind - up)) > tol:
        raise WindowTooSmall("window too small: discarded band is not at the invaded state "
                             f"(max deviation {np.max(np.abs(behind - up)):.3g})")
    down = hi_bc.value if hi_bc.kind == "dirichlet" else 0.0
    edge = u[..., -1]
    if np.max(np.abs(edge - down)) > tol:
        raise WindowTooSmall("window too small: the front reaches the downstream face "
                             f"(max deviation {np.max(np.abs(edge - down)):.3g})")
    new = np.empty_like(u)
    new[..., : n - cells] = u[..., cells:]
    new[..., n - cells:] = down
    return Field(d, np.ascontiguousarray(new), field.time, field.frame_offset + cells)


# observers and runs ----------------------------------------------------------------------------

class Observer:
    """Called with a field snapshot every ``every`` observation ticks."""

    name = "observer"
    every = 1

    def __call__(self, field: Field):
        raise NotImplementedError


class LevelObserver(Observer):
    def __init__(self, lambdas=(0.5,), every: int = 1, name: str = "levels"):
        self.lambdas = tuple(lambdas)
        self.every = every
        self.name = name

    def __call__(self, field: Field):
        from .levelset import extract_X
        out = {}
        for lam in self.lambdas:
            try:
                out[lam] = extract_X(field, lam)
            except ValueError:
                out[lam] = None
        return out


class SnapshotObserver(Observer):
    """Keeps full copies of the field at the listed times."""

    def __init__(self, times, name: str = "fields"):
        self.times = tuple(float(t) for t in times)
        self.name = name
        self.every = 1

    def wants(self, t: float, tol: float) -> bool:
        return any(abs(t - s) <= tol for s in self.times)

    def __call__(self, field: Field):
        return field.copy()


class MaxObserver(Observer):
    """Records (min, max) of the field; cheap invariant monitor."""

    name = "range"
    every = 1

    def __call__(self, field: Field):
        return float(field.values.min()), float(field.values.max())


@dataclass
class RunRecord:
    config: SolverConfig
    domain: Domain
    reaction: ReactionSpec
    dt: float
    observations: dict = field(default_factory=dict)
    shifts: list = field(default_factory=list)
    final: Optional[Field] = None
    timings: dict = field(default_factory=dict)

    def series(self, name):
        return self.observations.get(name, [])

    def level_series(self, lam: float, name: str = "levels"):
        from .levelset import LevelSetSeries
        slices = [obs[lam] for _, obs in self.series(name) if obs.get(lam) is not None]
        return LevelSetSeries(lam, slices, {"config_digest": self.digest()})

    def digest(self) -> str:
        blob = json.dumps({"config": self.config.to_dict(), "domain": self.domain.to_dict(),
                           "reaction": self.reaction.to_dict()}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def save(self, path, extra_meta: Optional[dict] = None) -> None:
        """Directory layout: metadata.json, fields/*.bin+json, <observer>_lambda<lam>.csv.

        Wall-clock timings stay in ``self.timings`` so that reruns write identical bytes.
        """
        os.makedirs(path, exist_ok=True)
        meta = {"config": self.config.to_dict(), "domain": self.domain.to_dict(),
                "reaction": self.reaction.to_dict(), "dt": self.dt, "digest": self.digest(),
                "shifts": self.shifts}
        if extra_meta:
            meta.update(extra_meta)
        with open(os.path.join(path, "metadata.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        snaps = self.series("fields")
        if snaps:
            fdir = os.path.join(path, "fields")
            os.makedirs(fdir, exist_ok=True)
            for t, f in snaps:
                save_field(f, os.path.join(fdir, f"field_t{t:012.4f}"))
        for name, obs in self.observations.items():
            if obs and isinstance(obs[0][1], dict):
                lams = sorted({lam for _, o in obs for lam in o})
                for lam in lams:
                    ser = self.level_series(lam, name)
                    if ser.slices:
                        ser.to_csv(os.path.join(path, f"{name}_lambda{lam:g}.csv"))


def save_field(field: Field, stem: str) -> None:
    field.values.astype("<f8").tofile(stem + ".bin")
    header = {"shape": list(field.values.shape), "dtype": "<f8", "h": list(field.domain.h),
              "frame_offset": field.frame_offset, "time": field.time,
              "domain": field.domain.to_dict()}
    with open(stem + ".json", "w") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_field(stem: str) -> Field:
    with open(stem + ".json") as fh:
        header = json.load(fh)
    vals = np.fromfile(stem + ".bin", dtype=header["dtype"]).reshape(header["shape"])
    return Field(Domain.from_dict(header["domain"]), np.ascontiguousarray(vals, dtype=float),
                 float(header["time"]), int(header["frame_offset"]))


def _level_position(field: Field, lam: float, column) -> Optional[float]:
    """Domain-local position of the largest lam-crossing in one column, or None.

    ``column="min"`` returns the lowest such position over all columns (the slowest column).
    """
    if column == "min" and field.values.ndim > 1:
        pos = [_level_position(Field(field.domain, row, field.time, field.frame_offset), lam, 0)
               for row in field.values]
        pos = [p for p in pos if p is not None]
        return min(pos) if pos else None
    u = field.values if field.values.ndim == 1 else field.values[0 if column == "min" else column]
    above = np.flatnonzero(u >= lam)
    if above.size == 0:
        return None
    j = above[-1]
    h = field.domain.h[field.domain.prop_axis]
    lo = field.domain.extents[field.domain.prop_axis][0]
    if j == u.size - 1:
        return lo + j * h
    return lo + (j + (u[j] - lam) / (u[j] - u[j + 1])) * h


def advance(field: Field, spec: ReactionSpec, config: SolverConfig, observers=(),
            on_chunk=None) -> RunRecord:
    """Evolve to config.max_time, observing every config.cadence and shifting the frame."""
    d = field.domain
    dt, steps, chunks = resolve_steps(d, spec, config)
    work = field.copy()
    obs_list = list(observers)
    rec = RunRecord(config, d, spec, dt, {o.name: [] for o in obs_list})
    n_obs = int(round(config.max_time / config.cadence))
    if abs(n_obs * config.cadence - config.max_time) > 1e-9 * max(1.0, config.max_time):
        raise ValueError("max_time must be a whole number of observation intervals")
    t0 = field.time
    fp = config.frame_policy
    ax = d.prop_axis
    n_prop = d.shape[ax]
    lo_prop, hi_prop = d.extents[ax]
    wall = _time.perf_counter()
    step_wall = 0.0

    def observe(k):
        for o in obs_list:
            if k % o.every:
                continue
            if isinstance(o, SnapshotObserver) and not o.wants(work.time, 0.5 * dt):
                continue
            rec.observations[o.name].append((work.time, o(work)))

    observe(0)
    for k in range(1, n_obs + 1):
        for c in range(chunks):
            s0 = _time.perf_counter()
            _advance_inplace(work, spec, config.scheme, dt, steps, ((k - 1) * chunks + c) * steps)
            step_wall += _time.perf_counter() - s0
            idx = ((k - 1) * chunks + c + 1) * steps
            work.time = t0 + idx * dt
            if fp is not None:
                while True:
                    pos = _level_position(work, fp.lam, fp.column)
                    if pos is None or pos < lo_prop + fp.trigger_fraction * (hi_prop - lo_prop):
                        break
                    cells = int(math.ceil(fp.shift_fraction * n_prop))
                    new = shift_frame(work, cells, fp.tol)
                    work.values, work.frame_offset = new.values, new.frame_offset
                    rec.shifts.append({"time": work.time, "cells": cells,
                                       "frame_offset": work.frame_offset})
            if on_chunk is not None:
                on_chunk(work)
        observe(k)
    rec.final = work
    rec.timings = {"wall_seconds": _time.perf_counter() - wall, "step_seconds": step_wall,
                   "backend": BACKEND}
    return rec


# discrete speeds ----------------------------------------------------------------------------

def discrete_minimal_speed(spec: ReactionSpec, h: float, dt: float,
                           scheme: str = "explicit_euler") -> float:
    """Linear spreading speed of the 1D scheme for a KPP reaction.

    For the explicit scheme a mode exp(-lam x) grows by 1 + dt (f'(0) + mu(lam)) per step
    with mu = (2 cosh(lam h) - 2)/h^2; the pulled speed is the minimum over lam of
    log(growth)/(dt lam). The Strang variant uses the exact reaction flow and the
    backward-Euler diffusion factor.
    """
    from scipy.optimize import minimize_scalar

    from .reaction import derivative_at_zero

    r0 = derivative_at_zero(spec)
    if r0 <= 0:
        raise ValueError("discrete minimal speed needs f'(0) > 0")

    def speed(lam):
        mu = (2.0 * math.cosh(lam * h) - 2.0) / h**2
        if scheme == "explicit_euler":
            g = math.log1p(dt * (r0 + mu))
        else:
            if dt * mu >= 1.0:
                return math.inf
            g = r0 * dt - math.log1p(-dt * mu)
        return g / (dt * lam)

    hi = 20.0
    if scheme != "explicit_euler":
        # keep dt mu(lam) < 1
        hi = min(hi, math.acosh(1.0 + 0.5 * h**2 / dt) / h * 0.999)
    res = minimize_scalar(speed, bounds=(1e-3, hi), method="bounded",
                          options={"xatol": 1e-12})
    return float(res.fun)
