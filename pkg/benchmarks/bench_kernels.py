#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Covers the three hot paths: counter-based GBM path generation, fused
Black-Scholes grids, and PnL accumulation. The network training itself is
matmul-bound and runs on BLAS either way, so it is not part of this
comparison.

Usage: python benchmarks/bench_kernels.py [--paths N] [--steps N] [--repeat N]
"""

import argparse
import time

import numpy as np

from hedgelab.kernels import available_backends


def timeit(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        tic = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - tic)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=20000)
    ap.add_argument("--steps", type=int, default=250)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = available_backends()
    if "native" not in backends:
        print("compiled backend not built; showing the numpy fallback only")

    paths, steps = args.paths, args.steps
    dt = 1.0 / steps
    tau = 1.4 - np.arange(steps + 1) * dt

    rng = np.random.default_rng(0)
    q = rng.normal(size=(paths, steps + 1, 2))
    q[:, steps, :] = 0.0
    frac = np.array([5e-5, 2.5e-3])

    cases = {}
    for name, mod in backends.items():
        gen = lambda mod=mod: mod.gbm_scenarios(
            7, 0, paths, steps, dt, 0.0, 2.0, -0.05, 0.1, 0.0, 0.3)
        spots = gen()[3]
        bs = lambda mod=mod, s=spots: mod.bs_grid(s, tau, 1.1, 0.0, 0.2)
        values = np.stack([bs()[0], spots], axis=2)
        pnl = lambda mod=mod, v=values: mod.pnl_terms(q, v, frac)
        cases[name] = {
            "gbm_scenarios": timeit(gen, args.repeat),
            "bs_grid": timeit(bs, args.repeat),
            "pnl_terms": timeit(pnl, args.repeat),
        }

    kernels = ["gbm_scenarios", "bs_grid", "pnl_terms"]
    print(f"\n{paths} paths x {steps} steps, best of {args.repeat}")
    header = f"{'kernel':<16}" + "".join(f"{b:>12}" for b in cases)
    if len(cases) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for k in kernels:
        row = f"{k:<16}" + "".join(f"{cases[b][k] * 1e3:>10.1f}ms" for b in cases)
        if len(cases) == 2:
            row += f"{cases['python'][k] / cases['native'][k]:>9.1f}x"
        print(row)


if __name__ == "__main__":
    main()
