"""Search-mode re-entry prior over the scene grid.

The prior is an L1-normalized nonnegative grid. While the target is lost
it relaxes toward the (normalized) anchor map through a blur-and-mix
update; on every confirmed detection it is re-centered as a Gaussian bump
at the current anchor's centroid. Both mixing terms are normalized to
unit mass first, so the blend factors act as true mass fractions and the
update contracts toward the map at rate beta per frame.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .anchors import AnchorMap
from .association import ScoredCandidate


@dataclass(frozen=True)
class ReentryPrior:
    grid: np.ndarray  # float64 (H, W), sums to 1, nonnegative
    sigma: float
    beta: float
    rho: float
    degenerate_map: bool = False  # the map had no mass; fell back to uniform


def _normalized(grid: np.ndarray) -> np.ndarray:
    total = float(grid.sum(dtype=np.float64))
    return grid / total


def _map_mass(amap: AnchorMap) -> np.ndarray | None:
    grid = amap.grid.astype(np.float64)
    total = float(grid.sum())
    if total <= 0.0:
        return None
    return grid / total


def init_prior(amap: AnchorMap, sigma: float, beta: float, rho: float) -> ReentryPrior:
    """Prior proportional to the map; uniform (with a warning) when the map is all-zero."""
    base = _map_mass(amap)
    degenerate = base is None
    if degenerate:
        warnings.warn("anchor map has zero mass; re-entry prior degenerates to uniform")
        h, w = amap.grid.shape
        base = np.full((h, w), 1.0 / (h * w), dtype=np.float64)
    return ReentryPrior(grid=base, sigma=sigma, beta=beta, rho=rho, degenerate_map=degenerate)


def search_update(prior: ReentryPrior, amap: AnchorMap) -> ReentryPrior:
    """Blur the prior, mix it with the normalized map, renormalize."""
    blurred = kernels.gaussian_blur(prior.grid, prior.sigma)
    base = _map_mass(amap)
    if base is None:
        base = np.full_like(prior.grid, 1.0 / prior.grid.size)
    mixed = prior.beta * blurred + (1.0 - prior.beta) * base
    return replace(prior, grid=_normalized(mixed))


def gaussian_bump(height: int, width: int, center: tuple[float, float], sigma: float) -> np.ndarray:
    """Unnormalized Gaussian bump exp(-|x - c|^2 / 2 sigma^2) on the pixel grid."""
    rows = np.arange(height, dtype=np.float64)[:, None] - center[0]
    cols = np.arange(width, dtype=np.float64)[None, :] - center[1]
    if sigma < 1e-6:
        bump = np.zeros((height, width), dtype=np.float64)
        r = min(height - 1, max(0, int(round(center[0]))))
        c = min(width - 1, max(0, int(round(center[1]))))
        bump[r, c] = 1.0
        return bump
    return np.exp(-(rows * rows + cols * cols) / (2.0 * sigma * sigma))


def redirect(prior: ReentryPrior, center: tuple[float, float], amap: AnchorMap) -> ReentryPrior:
    """Re-center the prior toward an anchor centroid after a confirmed detection."""
    h, w = prior.grid.shape
    bump = gaussian_bump(h, w, center, prior.sigma)
    bump_mass = float(bump.sum())
    if bump_mass > 0.0:
        bump = bump / bump_mass
    base = _map_mass(amap)
    if base is None:
        base = np.full_like(prior.grid, 1.0 / prior.grid.size)
    mixed = prior.rho * bump + (1.0 - prior.rho) * base
    return replace(prior, grid=_normalized(mixed))


def reweight(
    candidates: list[ScoredCandidate], amap: AnchorMap, prior: ReentryPrior
) -> list[ScoredCandidate]:
    """Multiply each candidate's rank score by the mean of map*prior over its mask.

    Used while searching: the product steers the pick toward regions where
    both the query's anchor evidence and the re-entry mass agree. Only the
    rank score changes; the fusion score stays comparable to theta.
    """
    amap64 = amap.grid.astype(np.float64)
    out = []
    for c in candidates:
        w = kernels.masked_mean_mul(amap64, prior.grid, c.proposal.mask)
        out.append(c.reweighted(w))
    return out
