"""Compare the compiled kernels with the numpy fallback on representative workloads.

Usage: python3 benchmarks/bench_kernels.py [--repeat N] [--quick]
"""
import argparse
import time

import numpy as np

from frontlab import _backend
from frontlab.reaction import ReactionSpec


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def workloads(quick):
    spec = ReactionSpec.logistic()
    code, par, tab = spec.kernel_params()
    n1 = 2000 if quick else 10000
    steps1 = 200 if quick else 2000
    x = np.linspace(0, 100, n1)
    u1 = 1 / (1 + np.exp(x - 20))
    h1 = x[1] - x[0]
    dt1 = 0.4 * h1 * h1

    def line(mod):
        u = u1.copy()
        mod.explicit_steps_1d(u, steps1, dt1, h1, 0.0, 0, 0, 1.0, 0, 0.0, code, par, tab)

    n0, n2 = (50, 200) if quick else (200, 800)
    steps2 = 20 if quick else 200
    y = np.linspace(-20, 20, n2)[None, :]
    u2 = np.ascontiguousarray(np.broadcast_to(1 / (1 + np.exp(y)), (n0, n2)))
    bk = np.array([1, 1, 0, 0], dtype=np.int32)
    bv = np.array([0.0, 0.0, 1.0, 0.0])

    def plane(mod):
        u = u2.copy()
        mod.explicit_steps_2d(u, steps2, 0.004, 0.2, 0.2, 0.0, 0, bk, bv, code, par, tab)

    bist = ReactionSpec.bistable(0.25)
    bcode, bpar, btab = bist.kernel_params()
    nmax = 20000 if quick else 200000

    def shoot(mod):
        rp, rq = np.empty(0), np.empty(0)
        mod.shoot_rk4(bcode, bpar, btab, 0.0, 1.0, 0.35, 1 - 1e-6, -1e-6, 1e-4, nmax, rp, rq)

    m, n = (100, 400) if quick else (400, 2000)
    rng = np.random.default_rng(0)
    sub = -0.3 * np.ones(n)
    cprime = -0.2 * np.ones(n)
    denom = 1.6 + rng.random(n)
    ut = rng.random((m, n))
    lo, hi = np.zeros(m), np.zeros(m)

    def tridiag(mod):
        mod.tridiag_solve_lines(ut.copy(), sub, cprime, denom, lo, hi)

    return [(f"explicit 1D ({n1} nodes x {steps1} steps)", line),
            (f"explicit 2D ({n0}x{n2} x {steps2} steps)", plane),
            (f"shooting RK4 ({nmax} steps max)", shoot),
            (f"tridiagonal sweeps ({m} lines x {n})", tridiag)]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--quick", action="store_true", help="smaller sizes for a fast smoke run")
    args = p.parse_args()
    py = _backend.get("python")
    try:
        cc = _backend.get("compiled")
    except ImportError:
        cc = None
        print("compiled extension not available; timing the numpy fallback only")
    print(f"{'workload':<44} {'compiled s':>11} {'numpy s':>11} {'speedup':>9}")
    for name, fn in workloads(args.quick):
        tp = best_of(lambda: fn(py), args.repeat)
        if cc is None:
            print(f"{name:<44} {'-':>11} {tp:>11.4f} {'-':>9}")
            continue
        tc = best_of(lambda: fn(cc), args.repeat)
        print(f"{name:<44} {tc:>11.4f} {tp:>11.4f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
