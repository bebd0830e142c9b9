"""Anchor memory: offline bank distillation and query-to-anchor alignment.

The bank is built once from the first T0 frames of a fixed-view trace by
keeping pixels whose features barely change over time, splitting them into
connected regions, and pooling one prototype per region on the
median-brightness frame. Aligning a text query against the prototypes
yields a softmax-weighted sum of the region masks: a query-conditioned
grid that stays constant for the whole run.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .container import fingerprint_frames
from .core import EmptySceneError, QuerySpec, ZeroVectorError, cosine, mask_centroid, normalize

MIN_REGION_PX = 16
FOUR_CONNECTED = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class Anchor:
    mask: np.ndarray  # bool (H, W)
    prototype: np.ndarray  # float32 (d_v,), unit norm
    centroid: tuple[float, float]  # (row, col)


@dataclass(frozen=True)
class AnchorBank:
    anchors: tuple[Anchor, ...]
    height: int
    width: int
    trace_hash: str
    t0: int
    t_star: int
    static_threshold: float
    truncated: bool = False

    def __len__(self) -> int:
        return len(self.anchors)

    def centroids(self) -> np.ndarray:
        return np.array([a.centroid for a in self.anchors], dtype=np.float64)

    def content_hash(self) -> str:
        h = hashlib.sha256()
        for a in self.anchors:
            h.update(np.packbits(a.mask).tobytes())
            h.update(np.ascontiguousarray(a.prototype, dtype="<f4").tobytes())
            h.update(np.array(a.centroid, dtype="<f8").tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class AlignmentHeads:
    """Linear projections into the shared alignment space, plus softmax temperature."""

    w_l: np.ndarray  # (d_l, d)
    b_l: np.ndarray  # (d,)
    w_v: np.ndarray  # (d_v, d)
    b_v: np.ndarray  # (d,)
    tau: float

    def project_text(self, e: np.ndarray) -> np.ndarray:
        return np.asarray(e, dtype=np.float64) @ self.w_l.astype(np.float64) + self.b_l

    def project_visual(self, v: np.ndarray) -> np.ndarray:
        return np.asarray(v, dtype=np.float64) @ self.w_v.astype(np.float64) + self.b_v


def make_heads(d_l: int, d_v: int, tau: float, seed: int = 0, dim: int = 0) -> AlignmentHeads:
    """Identity heads when dims already agree, else a seeded orthonormal projection."""
    if dim <= 0:
        dim = d_l if d_l == d_v else min(d_l, d_v)
    if d_l == d_v == dim:
        w_l = np.eye(d_l, dtype=np.float32)
        w_v = np.eye(d_v, dtype=np.float32)
    else:
        rng = np.random.default_rng([seed, d_l, d_v, dim])
        w_l, _ = np.linalg.qr(rng.standard_normal((d_l, d_l)))
        w_v, _ = np.linalg.qr(rng.standard_normal((d_v, d_v)))
        w_l = w_l[:, :dim].astype(np.float32)
        w_v = w_v[:, :dim].astype(np.float32)
    zeros = np.zeros(dim, dtype=np.float32)
    return AlignmentHeads(w_l=w_l, b_l=zeros, w_v=w_v, b_v=zeros, tau=tau)


@dataclass(frozen=True)
class AnchorMap:
    grid: np.ndarray  # float32 (H, W), values in [0, 1]
    weights: np.ndarray  # float64 (K,), simplex
    query_fingerprint: str
    clipped: bool = False  # set when overlapping masks pushed values above 1


def select_median_brightness_frame(frames) -> int:
    """Index of the lower-median mean_brightness, first occurrence on ties."""
    if len(frames) == 0:
        raise ValueError("no frames")
    brightness = np.array([frames[i].mean_brightness for i in range(len(frames))])
    order = np.argsort(brightness, kind="stable")
    target = brightness[order[(len(order) - 1) // 2]]
    return int(np.nonzero(brightness == target)[0][0])


def pool_prototype(mask: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Unit-norm mean feature over mask pixels."""
    if not mask.any():
        raise ValueError("cannot pool over an empty mask")
    mean = kernels.masked_mean_channels(features, mask)
    return normalize(mean)


def centroid(mask: np.ndarray) -> tuple[float, float]:
    return mask_centroid(mask)


def softmax(scores: np.ndarray, tau: float) -> np.ndarray:
    """Stable softmax of tau * scores."""
    z = tau * np.asarray(scores, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def build_bank(
    frames,
    k: int,
    static_threshold: float = 1e-3,
    min_region_px: int = MIN_REGION_PX,
) -> AnchorBank:
    """Distill up to k anchors from the first frames of a fixed-view trace.

    A pixel is static when the mean-over-channels temporal variance of its
    feature vector stays below static_threshold. Static pixels are split
    into 4-connected regions, ranked by area; regions smaller than
    min_region_px are dropped. Prototypes are pooled on the
    median-brightness frame.
    """
    t0 = len(frames)
    if t0 < 2:
        raise ValueError("bank distillation needs at least 2 frames")
    if k < 1:
        raise ValueError("k must be >= 1")

    h, w, d = frames[0].features.shape
    acc = np.zeros((h, w, d), dtype=np.float64)
    acc_sq = np.zeros((h, w, d), dtype=np.float64)
    for i in range(t0):
        f = frames[i].features.astype(np.float64)
        acc += f
        acc_sq += f * f
    mean = acc / t0
    var = np.maximum(acc_sq / t0 - mean * mean, 0.0)
    static = var.mean(axis=2) < static_threshold
    if not static.any():
        raise EmptySceneError("no static pixels below the variance threshold")

    labels, count = ndimage.label(static, structure=FOUR_CONNECTED)
    if count == 0:
        raise EmptySceneError("no connected static regions")
    areas = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, count + 1))
    order = np.argsort(-areas, kind="stable") + 1
    keep = [int(lbl) for lbl in order if areas[lbl - 1] >= min_region_px]
    if not keep:
        raise EmptySceneError(f"all static regions smaller than {min_region_px} px")
    truncated = len(keep) < k
    keep = keep[:k]

    t_star = select_median_brightness_frame(frames)
    ref = frames[t_star].features
    anchors = []
    for lbl in keep:
        mask = labels == lbl
        anchors.append(
            Anchor(mask=mask, prototype=pool_prototype(mask, ref), centroid=mask_centroid(mask))
        )
    return AnchorBank(
        anchors=tuple(anchors),
        height=h,
        width=w,
        trace_hash=fingerprint_frames(frames, t0),
        t0=t0,
        t_star=t_star,
        static_threshold=static_threshold,
        truncated=truncated,
    )


def query_fingerprint(query: QuerySpec) -> str:
    h = hashlib.sha256()
    h.update(query.text.encode("utf-8"))
    h.update(np.ascontiguousarray(query.embedding, dtype="<f4").tobytes())
    return h.hexdigest()


def align_query(query: QuerySpec, bank: AnchorBank, heads: AlignmentHeads) -> AnchorMap:
    """Project query and prototypes into the shared space, weight masks by softmax."""
    text_vec = heads.project_text(query.embedding)
    scores = np.empty(len(bank), dtype=np.float64)
    for i, anchor in enumerate(bank.anchors):
        try:
            scores[i] = cosine(text_vec, heads.project_visual(anchor.prototype))
        except ZeroVectorError:
            scores[i] = -1.0
    weights = softmax(scores, heads.tau)

    grid = np.zeros((bank.height, bank.width), dtype=np.float64)
    for weight, anchor in zip(weights, bank.anchors):
        grid[anchor.mask] += weight
    clipped = bool(grid.max() > 1.0 + 1e-6)
    grid = np.clip(grid, 0.0, 1.0)
    return AnchorMap(
        grid=grid.astype(np.float32),
        weights=weights,
        query_fingerprint=query_fingerprint(query),
        clipped=clipped,
    )
