#!/usr/bin/env python3
"""Benchmark the numba kernels against their pure-numpy fallbacks.

Usage:
    python bench/kernel_bench.py [--sizes 1000,2000,4000] [--repeats 3]

The same comparison can be forced at the library level by setting
TOPO_DISABLE_NUMBA=1, which routes every caller through the numpy path.
"""
import argparse
import time

import numpy as np

from trajtopo import _kernels


def timed(fn, *args, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_prim(sizes, repeats):
    print(f"\nprim_mst_lengths (dense {max(sizes)}x{max(sizes)} worst case)")
    print(f"{'n':>6} {'numpy [s]':>12} {'numba [s]':>12} {'speedup':>9}")
    rng = np.random.default_rng(0)
    for n in sizes:
        pts = rng.random((n, 2))
        sq = (pts ** 2).sum(1)
        d = np.sqrt(np.maximum(sq[:, None] + sq[None, :] - 2 * pts @ pts.T, 0))
        t_np = timed(_kernels.prim_mst_lengths_numpy, d, repeats=repeats)
        if _kernels.HAS_NUMBA:
            t_nb = timed(_kernels.prim_mst_lengths_numba, d, repeats=repeats)
            print(f"{n:>6} {t_np:>12.4f} {t_nb:>12.4f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{n:>6} {t_np:>12.4f} {'-':>12} {'-':>9}")


def bench_minkowski(rows, cols, repeats):
    print(f"\nminkowski_rows ({rows} trajectory points x {cols} loss columns)")
    print(f"{'p':>6} {'numpy [s]':>12} {'numba [s]':>12} {'speedup':>9}")
    rng = np.random.default_rng(1)
    mat = rng.random((rows, cols))
    for p in (1.0, 2.0, 3.0):
        t_np = timed(_kernels.minkowski_rows_numpy, mat, p, repeats=repeats)
        if _kernels.HAS_NUMBA:
            t_nb = timed(_kernels.minkowski_rows_numba, mat, p, repeats=repeats)
            print(f"{p:>6.1f} {t_np:>12.4f} {t_nb:>12.4f} {t_np / t_nb:>8.1f}x")
        else:
            print(f"{p:>6.1f} {t_np:>12.4f} {'-':>12} {'-':>9}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="1000,2000,4000")
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--loss-shape", default="500,2000",
                        help="rows,cols for the loss-matrix benchmark")
    args = parser.parse_args()

    print(f"numba backend active: {_kernels.HAS_NUMBA}")
    if _kernels.HAS_NUMBA:
        _kernels.warmup()  # JIT compile outside the timed region

    sizes = [int(s) for s in args.sizes.split(",")]
    bench_prim(sizes, args.repeats)
    rows, cols = (int(x) for x in args.loss_shape.split(","))
    bench_minkowski(rows, cols, args.repeats)


if __name__ == "__main__":
    main()
