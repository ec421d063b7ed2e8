"""Compare the compiled and numpy kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--m 32768] [--repeat 5]

Times each per-path kernel on a Table-6-sized problem (two-dimensional state,
140 x 140 hypercube cells) plus a nearest-center search, checks that both
backends return the same numbers, and finally times one complete backward
solve with each backend selected.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from bsdemc import kernels
from bsdemc.bench import preset, solve_once


def _best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(m: int, rng: np.random.Generator):
    x = rng.uniform(60.0, 200.0, size=(m, 2))
    lower = np.array([60.0, 60.0])
    cells = kernels.hc_cells(x, lower, 1.0, 140)
    u = np.column_stack([np.ones(m), rng.standard_normal(m)])
    y = rng.standard_normal(m)
    coef = rng.standard_normal((140 * 140, 2))
    centers = rng.uniform(60.0, 200.0, size=(64, 2))
    return {
        "hc_cells": lambda impl: kernels.hc_cells(x, lower, 1.0, 140, impl=impl),
        "nearest_center(64)": lambda impl: kernels.nearest_center(x, centers, impl=impl),
        "cell_gram": lambda impl: kernels.cell_gram(cells, u, 140 * 140, impl=impl)[0],
        "cell_cross": lambda impl: kernels.cell_cross(cells, u, y, 140 * 140, impl=impl),
        "cell_dot": lambda impl: kernels.cell_dot(cells, coef, u, impl=impl),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m", type=int, default=32768)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    if "cython" not in backends:
        print("compiled kernels not built; only the numpy backend is available")
    names = list(backends)
    print(f"M = {args.m}, best of {args.repeat}")
    print(f"{'kernel':<20}" + "".join(f"{n + ' [ms]':>15}" for n in names) + f"{'speedup':>10}  agree")
    for label, fn in kernel_cases(args.m, np.random.default_rng(0)).items():
        times = [_best(lambda: fn(backends[n]), args.repeat) * 1e3 for n in names]
        outs = [fn(backends[n]) for n in names]
        agree = all(np.allclose(outs[0], o, rtol=1e-12, atol=1e-12) for o in outs[1:])
        speed = times[0] / times[-1] if len(times) > 1 else 1.0
        print(f"{label:<20}" + "".join(f"{t:>15.3f}" for t in times) + f"{speed:>10.1f}  {agree}")

    spec = preset("table6")
    print(f"\nfull backward solve, preset table6, M = {args.m}")
    saved = kernels._impl
    try:
        for n in names:
            kernels._impl = backends[n]
            y0 = solve_once(spec, args.m, 0)
            t = _best(lambda: solve_once(spec, args.m, 0), max(1, args.repeat // 2))
            print(f"  {n:<8} {t:8.3f} s   y0 = {y0:.12f}")
    finally:
        kernels._impl = saved


if __name__ == "__main__":
    main()
