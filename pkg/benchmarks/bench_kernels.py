#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]

The numba side is warmed up first so JIT compilation is excluded.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from anchorref.kernels import _numpy as knp

try:
    from anchorref.kernels import _numba as knb
except ImportError:
    knb = None


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(size):
    rng = np.random.default_rng(0)
    grid = rng.random((size, size))
    grid64 = grid / grid.sum()
    feat = rng.standard_normal((size, size, 32)).astype(np.float32)
    mask = rng.random((size, size)) > 0.7
    mask[0, 0] = True
    q = size // 4
    return [
        (f"gaussian_blur sigma=1 ({size}x{size})", lambda k: k.gaussian_blur(grid64, 1.0)),
        (f"gaussian_blur sigma=4 ({size}x{size})", lambda k: k.gaussian_blur(grid64, 4.0)),
        (f"masked_mean_channels ({size}x{size}x32)", lambda k: k.masked_mean_channels(feat, mask)),
        (f"masked_mean_mul ({size}x{size})", lambda k: k.masked_mean_mul(grid, grid64, mask)),
        (f"box_mean ({size}x{size})", lambda k: k.box_mean(grid, q, 3 * q, q, 3 * q)),
    ]


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--sizes", type=int, nargs="*", default=[64, 128, 256])
    args = ap.parse_args()

    if knb is None:
        print("numba unavailable; nothing to compare")
        return

    rows = []
    for size in args.sizes:
        for name, call in cases(size):
            call(knb)  # JIT warmup
            t_np = time_call(lambda: call(knp), args.repeats)
            t_nb = time_call(lambda: call(knb), args.repeats)
            rows.append((name, t_np * 1e6, t_nb * 1e6, t_np / t_nb))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel'.ljust(width)}  {'numpy us':>10}  {'numba us':>10}  {'speedup':>8}")
    for name, t_np, t_nb, speedup in rows:
        print(f"{name.ljust(width)}  {t_np:10.1f}  {t_nb:10.1f}  {speedup:7.2f}x")


if __name__ == "__main__":
    main()
