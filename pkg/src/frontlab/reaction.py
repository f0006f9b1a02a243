"""Reaction terms f on [0, 1] and checks of their structural hypotheses.

All reactions satisfy f(0) = f(1) = 0 and are extended by 0 outside [0, 1].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

KINDS = ("logistic", "power_kpp", "ignition", "bistable", "tristable", "tabulated")

# integer codes shared with the compiled kernels
KIND_CODES = {name: i for i, name in enumerate(KINDS)}


@dataclass(frozen=True)
class ReactionSpec:
    """Parametric nonlinearity.

    ``params`` depends on ``kind``:

    - logistic: ()                       f = s(1-s)
    - power_kpp: (p,)                    f = s^p (1-s), p >= 1
    - ignition: (alpha,)                 f = (s-alpha)(1-s) on (alpha, 1), 0 below
    - bistable: (a,)                     f = s(1-s)(s-a)
    - tristable: (a, b, g, A1, A2)       f = A(s) s(s-a)(s-b)(s-g)(1-s), A = A1 below b, A2 above
    - tabulated: uniform samples of f on [0, 1], endpoints pinned to 0

    Every kind is multiplied by ``scale``.
    """

    kind: str
    params: tuple = ()
    scale: float = 1.0
    table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reaction kind {self.kind!r}")
        if not (self.scale >= 0 and math.isfinite(self.scale)):
            raise ValueError("scale must be a finite nonnegative number")
        p = self.params
        if self.kind == "logistic" and p:
            raise ValueError("logistic takes no parameters")
        if self.kind == "power_kpp":
            if len(p) != 1 or p[0] < 1:
                raise ValueError("power_kpp needs p >= 1")
        if self.kind in ("ignition", "bistable"):
            if len(p) != 1 or not 0 < p[0] < 1:
                raise ValueError(f"{self.kind} parameter must lie in (0, 1)")
        if self.kind == "tristable":
            if len(p) != 5:
                raise ValueError("tristable needs (a, b, g, A1, A2)")
            a, b, g, a1, a2 = p
            if not 0 < a < b < g < 1:
                raise ValueError("tristable needs 0 < a < b < g < 1")
            if a1 <= 0 or a2 <= 0:
                raise ValueError("tristable amplitudes must be positive")
        if self.kind == "tabulated":
            if len(self.table) < 3:
                raise ValueError("tabulated reaction needs at least 3 samples")
            if not all(math.isfinite(v) for v in self.table):
                raise ValueError("tabulated samples must be finite")

    # constructors -------------------------------------------------------

    @classmethod
    def logistic(cls, scale: float = 1.0) -> "ReactionSpec":
        return cls("logistic", (), scale)

    @classmethod
    def power_kpp(cls, p: float, scale: float = 1.0) -> "ReactionSpec":
        return cls("power_kpp", (float(p),), scale)

    @classmethod
    def ignition(cls, alpha: float, scale: float = 1.0) -> "ReactionSpec":
        return cls("ignition", (float(alpha),), scale)

    @classmethod
    def bistable(cls, a: float, scale: float = 1.0) -> "ReactionSpec":
        return cls("bistable", (float(a),), scale)

    @classmethod
    def tristable(cls, a, b, g, amp_low=1.0, amp_high=1.0, scale=1.0) -> "ReactionSpec":
        return cls("tristable", (float(a), float(b), float(g), float(amp_low), float(amp_high)), scale)

    @classmethod
    def tabulated(cls, samples, scale: float = 1.0) -> "ReactionSpec":
        vals = [float(v) for v in samples]
        # endpoint pinning keeps f(0) = f(1) = 0 exact
        if vals:
            vals[0] = 0.0
            vals[-1] = 0.0
        return cls("tabulated", (), scale, tuple(vals))

    @classmethod
    def from_dict(cls, d: dict) -> "ReactionSpec":
        kind = d["kind"]
        keys = {"logistic": (), "power_kpp": ("p",), "ignition": ("alpha",), "bistable": ("a",),
                "tristable": ("a", "b", "g", "amp_low", "amp_high"), "tabulated": ("samples",)}
        if kind in keys:
            extra = set(d) - {"kind", "scale", *keys[kind]}
            if extra:
                raise ValueError(f"unknown keys for {kind} reaction: {', '.join(sorted(extra))}")
        scale = float(d.get("scale", 1.0))
        if kind == "logistic":
            return cls.logistic(scale)
        if kind == "power_kpp":
            return cls.power_kpp(d["p"], scale)
        if kind == "ignition":
            return cls.ignition(d["alpha"], scale)
        if kind == "bistable":
            return cls.bistable(d["a"], scale)
        if kind == "tristable":
            return cls.tristable(d["a"], d["b"], d["g"], d.get("amp_low", 1.0),
                                 d.get("amp_high", 1.0), scale)
        if kind == "tabulated":
            return cls.tabulated(d["samples"], scale)
        raise ValueError(f"unknown reaction kind {kind!r}")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "scale": self.scale}
        if self.kind == "power_kpp":
            out["p"] = self.params[0]
        elif self.kind == "ignition":
            out["alpha"] = self.params[0]
        elif self.kind == "bistable":
            out["a"] = self.params[0]
        elif self.kind == "tristable":
            out.update(zip(("a", "b", "g", "amp_low", "amp_high"), self.params))
        elif self.kind == "tabulated":
            out["samples"] = list(self.table)
        return out

    # evaluation ---------------------------------------------------------

    def __call__(self, s):
        return eval_f(self, s)

    def kernel_params(self) -> tuple[int, np.ndarray, np.ndarray]:
        """(kind code, parameter vector, table) as consumed by the step kernels."""
        par = np.zeros(6)
        par[0] = self.scale
        par[1:1 + len(self.params)] = self.params
        table = np.asarray(self.table if self.table else (0.0, 0.0), dtype=float)
        return KIND_CODES[self.kind], par, table

    @property
    def kinks(self) -> tuple:
        """Points in (0, 1) where f is not differentiable."""
        if self.kind == "ignition":
            return (self.params[0],)
        if self.kind == "tristable" and self.params[3] != self.params[4]:
            return (self.params[1],)
        if self.kind == "tabulated":
            n = len(self.table)
            return tuple(i / (n - 1) for i in range(1, n - 1))
        return ()

    @cached_property
    def lipschitz(self) -> float:
        """Lipschitz constant of f on [0, 1] by dense sampling, with 1% headroom."""
        s = np.linspace(0.0, 1.0, 200001)
        v = eval_f(self, s)
        slope = np.abs(np.diff(v)) / (s[1] - s[0])
        lip = float(slope.max()) if slope.size else 0.0
        if self.kind == "tabulated":
            return lip
        return 1.01 * lip


def _poly(kind: str, p: tuple, s: np.ndarray) -> np.ndarray:
    if kind == "logistic":
        return s * (1.0 - s)
    if kind == "power_kpp":
        return np.power(s, p[0]) * (1.0 - s)
    if kind == "ignition":
        alpha = p[0]
        return np.where(s > alpha, (s - alpha) * (1.0 - s), 0.0)
    if kind == "bistable":
        return s * (1.0 - s) * (s - p[0])
    if kind == "tristable":
        a, b, g, a1, a2 = p
        amp = np.where(s < b, a1, a2)
        return amp * s * (s - a) * (s - b) * (s - g) * (1.0 - s)
    raise AssertionError(kind)


def eval_f(spec: ReactionSpec, s):
    """f(s), zero outside [0, 1]; accepts scalars or arrays."""
    arr = np.asarray(s, dtype=float)
    inside = (arr >= 0.0) & (arr <= 1.0)
    x = np.where(inside, arr, 0.0)
    if spec.kind == "tabulated":
        tab = np.asarray(spec.table)
        grid = np.linspace(0.0, 1.0, tab.size)
        val = np.interp(x, grid, tab)
    else:
        val = _poly(spec.kind, spec.params, x)
    out = np.where(inside, spec.scale * val, 0.0)
    if out.ndim == 0:
        return float(out)
    return out


def reaction_flow(spec: ReactionSpec, u: np.ndarray, tau: float, substeps: int = 4) -> np.ndarray:
    """Advance u' = f(u) by time tau: closed form for logistic, RK4 otherwise."""
    u = np.asarray(u, dtype=float)
    if spec.kind == "logistic":
        e = math.exp(spec.scale * tau)
        return u * e / (1.0 + u * (e - 1.0))
    h = tau / substeps
    for _ in range(substeps):
        k1 = eval_f(spec, u)
        k2 = eval_f(spec, u + 0.5 * h * k1)
        k3 = eval_f(spec, u + 0.5 * h * k2)
        k4 = eval_f(spec, u + h * k3)
        u = u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def derivative_at_zero(spec: ReactionSpec) -> float:
    """f'(0): analytic for parametric kinds, Richardson-extrapolated difference for tables."""
    k, p, c = spec.kind, spec.params, spec.scale
    if k == "logistic":
        return c
    if k == "power_kpp":
        return c if p[0] == 1 else 0.0
    if k == "ignition":
        return 0.0
    if k == "bistable":
        return -c * p[0]
    if k == "tristable":
        a, b, g, a1, _ = p
        return -c * a1 * a * b * g
    # one-sided difference on the first table cell, extrapolated
    h = 1.0 / (len(spec.table) - 1)
    d1 = eval_f(spec, h) / h
    d2 = eval_f(spec, h / 2) / (h / 2)
    return 2.0 * d2 - d1


# hypothesis checks --------------------------------------------------------

@dataclass
class HypothesisReport:
    invasion_holds: Optional[bool] = None
    theta: Optional[float] = None
    trailing_integrals_positive: Optional[bool] = None
    kpp0_holds: Optional[bool] = None
    fkpp_holds: Optional[bool] = None
    hair_trigger_exponent_ok: Optional[bool] = None
    indeterminate: bool = False
    min_trailing_integral: Optional[float] = None


def adaptive_simpson(fun, a: float, b: float, tol: float, max_depth: int = 40) -> tuple[float, float]:
    """Adaptive Simpson quadrature; returns (value, error estimate)."""

    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    def rec(lo, hi, fa, fm, fb, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = fun(lm), fun(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0, abs(delta) / 15.0
        lv, le = rec(lo, mid, fa, flm, fm, left, eps / 2, depth - 1)
        rv, re = rec(mid, hi, fm, frm, fb, right, eps / 2, depth - 1)
        return lv + rv, le + re

    fa, fb, fm = fun(a), fun(b), fun(0.5 * (a + b))
    return rec(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def trailing_integrals(spec: ReactionSpec, grid_n: int, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Grid t_i = i/n and the integrals of f over [t_i, 1] with their error bounds."""
    grid = np.arange(grid_n + 1) / grid_n
    f = lambda s: eval_f(spec, s)
    seg = np.empty(grid_n)
    err = np.empty(grid_n)
    for i in range(grid_n):
        seg[i], err[i] = adaptive_simpson(f, grid[i], grid[i + 1], tol / grid_n)
    # accumulate from the top so each entry is the integral over [t_i, 1]
    vals = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
    errs = np.concatenate([np.cumsum(err[::-1])[::-1], [0.0]])
    return grid, vals, errs + tol


def check_invasion(spec: ReactionSpec, grid_n: int = 1000) -> HypothesisReport:
    """Test f > 0 on [theta, 1) and positivity of every trailing integral of f."""
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    margin = 1e-12 * max(spec.lipschitz, 1e-300)
    grid = np.arange(grid_n + 1) / grid_n
    vals = eval_f(spec, grid[:-1])
    theta = None
    if vals[-1] > margin:
        i = grid_n - 1
        while i >= 0 and vals[i] > margin:
            i -= 1
        theta = float(grid[i + 1])

    tgrid, ints, errs = trailing_integrals(spec, grid_n)
    ints, errs = ints[:-1], errs[:-1]  # t = 1 excluded
    positive = bool(np.all(ints > errs))
    indeterminate = bool(np.any(np.abs(ints) <= errs))
    return HypothesisReport(
        invasion_holds=theta is not None and positive,
        theta=theta,
        trailing_integrals_positive=positive,
        indeterminate=indeterminate,
        min_trailing_integral=float(ints.min()),
    )


def check_kpp_class(spec: ReactionSpec, grid_n: int = 1000, dim: int = 1) -> HypothesisReport:
    """KPP checks: 0 < f(s) <= f'(0)s, f(s)/s nonincreasing, and the hair-trigger exponent.

    When f'(0) = 0 the first check reduces to f > 0 on (0, 1).
    """
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    margin = 1e-12 * max(spec.lipschitz, 1e-300)
    s = np.arange(1, grid_n) / grid_n
    f = eval_f(spec, s)
    fp0 = derivative_at_zero(spec)
    positive = bool(np.all(f > margin))
    # with f'(0) = 0 (degenerate monostable, e.g. s^p(1-s) with p > 1) the tangent bound is
    # vacuous and only positivity is required
    kpp0 = positive and (fp0 == 0.0 or bool(np.all(f <= fp0 * s + margin)))
    ratio = eval_f(spec, np.append(s, 1.0)) / np.append(s, 1.0)
    fkpp = positive and bool(np.all(np.diff(ratio) <= margin))

    # liminf f(s)/s^(1+2/N) > 0: the log-log slope near 0 must not be positive
    expo = 1.0 + 2.0 / dim
    small = np.logspace(-6, -10, 9)
    fs = eval_f(spec, small)
    if np.any(fs <= 0):
        hair = False
    else:
        r = np.log(fs / small ** expo)
        slope = np.polyfit(np.log(small), r, 1)[0]
        hair = positive and slope <= 1e-3
    return HypothesisReport(kpp0_holds=kpp0, fkpp_holds=fkpp, hair_trigger_exponent_ok=bool(hair))
