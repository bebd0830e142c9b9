"""Numba-compiled grid kernels.

Same contracts as kernels._numpy; inner loops run under @njit(cache=True)
so compiled code persists across processes. Accumulation is float64.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ._numpy import gaussian_kernel_1d


@njit(cache=True)
def _reflect(i: int, n: int) -> int:
    # Half-sample symmetric reflection, folded until the index is in range.
    while i < 0 or i >= n:
        if i < 0:
            i = -i - 1
        else:
            i = 2 * n - i - 1
    return i


@njit(cache=True)
def _blur_sep(grid: np.ndarray, k: np.ndarray) -> np.ndarray:
    h, w = grid.shape
    radius = (k.shape[0] - 1) // 2
    tmp = np.zeros((h, w), dtype=np.float64)
    out = np.zeros((h, w), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for j in range(k.shape[0]):
                cc = _reflect(c + j - radius, w)
                acc += k[j] * grid[r, cc]
            tmp[r, c] = acc
    for r in range(h):
        for c in range(w):
            acc = 0.0
            for j in range(k.shape[0]):
                rr = _reflect(r + j - radius, h)
                acc += k[j] * tmp[rr, c]
            out[r, c] = acc
    return out


def gaussian_blur(grid: np.ndarray, sigma: float) -> np.ndarray:
    g = np.asarray(grid, dtype=np.float64)
    if sigma <= 0.0:
        return g.copy()
    return _blur_sep(g, gaussian_kernel_1d(sigma))


@njit(cache=True)
def _masked_mean_channels(features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    h, w, d = features.shape
    acc = np.zeros(d, dtype=np.float64)
    count = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                count += 1
                for ch in range(d):
                    acc[ch] += features[r, c, ch]
    return acc / count


def masked_mean_channels(features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    return _masked_mean_channels(features, mask)


@njit(cache=True)
def _masked_mean_grid(grid: np.ndarray, mask: np.ndarray) -> float:
    h, w = grid.shape
    acc = 0.0
    count = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                acc += grid[r, c]
                count += 1
    return acc / count


def masked_mean_grid(grid: np.ndarray, mask: np.ndarray) -> float:
    return float(_masked_mean_grid(np.asarray(grid, dtype=np.float64), mask))


@njit(cache=True)
def _masked_mean_mul(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    h, w = a.shape
    acc = 0.0
    count = 0
    for r in range(h):
        for c in range(w):
            if mask[r, c]:
                acc += a[r, c] * b[r, c]
                count += 1
    return acc / count


def masked_mean_mul(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    return float(
        _masked_mean_mul(
            np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64), mask
        )
    )


@njit(cache=True)
def _box_mean(grid: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> float:
    acc = 0.0
    for r in range(y0, y1):
        for c in range(x0, x1):
            acc += grid[r, c]
    return acc / ((y1 - y0) * (x1 - x0))


def box_mean(grid: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> float:
    return float(_box_mean(np.asarray(grid, dtype=np.float64), y0, y1, x0, x1))
