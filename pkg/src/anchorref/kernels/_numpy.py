"""Pure-numpy implementations of the hot grid kernels.

Reference backend: always available, used when numba is absent or when
ANCHORREF_BACKEND=numpy. All reductions accumulate in float64.
"""
from __future__ import annotations

import math

import numpy as np


def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma).

    sigma below 1e-6 px degenerates to the identity kernel [1.0] (and
    avoids underflow in the 2*sigma^2 denominator).
    """
    if sigma < 1e-6:
        return np.ones(1, dtype=np.float64)
    radius = int(math.ceil(3.0 * sigma))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def _reflect_pad_1d_indices(n: int, radius: int) -> np.ndarray:
    # Half-sample symmetric reflection (edge sample repeated), folded as many
    # times as needed so radius > n stays valid. This boundary conserves the
    # total mass of symmetric kernels exactly.
    idx = np.arange(-radius, n + radius)
    period = 2 * n
    idx = np.mod(idx, period)
    idx = np.where(idx >= n, period - idx - 1, idx)
    return idx


def gaussian_blur(grid: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with half-sample reflective boundary."""
    out = np.asarray(grid, dtype=np.float64)
    if sigma <= 0.0:
        return out.copy()
    k = gaussian_kernel_1d(sigma)
    radius = (len(k) - 1) // 2
    h, w = out.shape

    cols = _reflect_pad_1d_indices(w, radius)
    padded = out[:, cols]
    tmp = np.zeros_like(out)
    for j in range(len(k)):
        tmp += k[j] * padded[:, j : j + w]

    rows = _reflect_pad_1d_indices(h, radius)
    padded = tmp[rows, :]
    res = np.zeros_like(out)
    for j in range(len(k)):
        res += k[j] * padded[j : j + h, :]
    return res


def masked_mean_channels(features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Mean feature vector over mask pixels; float64 accumulation."""
    sel = features[mask]
    return sel.astype(np.float64).sum(axis=0) / sel.shape[0]


def masked_mean_grid(grid: np.ndarray, mask: np.ndarray) -> float:
    sel = grid[mask]
    return float(sel.astype(np.float64).sum() / sel.shape[0])


def masked_mean_mul(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """Mean of a(x)*b(x) over mask pixels."""
    sa = a[mask].astype(np.float64)
    sb = b[mask].astype(np.float64)
    return float((sa * sb).sum() / sa.shape[0])


def box_mean(grid: np.ndarray, y0: int, y1: int, x0: int, x1: int) -> float:
    sel = grid[y0:y1, x0:x1]
    return float(sel.astype(np.float64).sum() / sel.size)
