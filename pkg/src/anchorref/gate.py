"""Identity continuity gate: momentum queue similarity, displacement in the
anchor frame, and the logistic acceptance score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .anchors import AnchorBank
from .core import cosine, mask_centroid, normalize


@dataclass(frozen=True)
class GateParams:
    alpha1: float = 2.0  # identity similarity weight
    alpha2: float = 1.0  # anchor evidence weight
    alpha3: float = 1.0  # displacement penalty weight
    bias: float = -2.0
    gamma: float = 0.5  # accept threshold on the logistic score


@dataclass(frozen=True)
class IdentityQueue:
    entries: tuple[np.ndarray, ...] = ()
    capacity: int = 8
    momentum: float = 0.9
    novelty_floor: float = 0.5

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    gate_score: float
    sim: float
    displacement: float
    anchor_evidence: float
    bootstrap: bool = False  # queue was empty; sim defaulted to its max
    new_anchor_index: int | None = None


def sim_reid(candidate_embedding: np.ndarray, queue: IdentityQueue) -> float | None:
    """Max cosine against the queue; None signals an empty queue (new identity)."""
    if not queue.entries:
        return None
    return max(cosine(candidate_embedding, q) for q in queue.entries)


def displacement(
    mask: np.ndarray, anchor_centroid: tuple[float, float] | None, height: int, width: int
) -> float:
    """Distance from the mask centroid to the anchor centroid, over the image
    diagonal. Zero when no anchor is attached yet."""
    if anchor_centroid is None:
        return 0.0
    mr, mc = mask_centroid(mask)
    d = math.hypot(mr - anchor_centroid[0], mc - anchor_centroid[1])
    return d / math.sqrt(height * height + width * width)


def _sigmoid(z: float) -> float:
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def gate(
    identity_embedding: np.ndarray,
    anchor_evidence: float,
    mask: np.ndarray,
    queue: IdentityQueue,
    params: GateParams,
    anchor_centroid: tuple[float, float] | None,
    height: int,
    width: int,
) -> GateDecision:
    """Logistic acceptance over identity similarity, anchor evidence, and
    displacement. An empty queue bootstraps with sim = 1 so a fresh track
    can start."""
    sim = sim_reid(identity_embedding, queue)
    bootstrap = sim is None
    if bootstrap:
        sim = 1.0
    delta = displacement(mask, anchor_centroid, height, width)
    z = params.alpha1 * sim + params.alpha2 * anchor_evidence - params.alpha3 * delta + params.bias
    score = _sigmoid(z)
    return GateDecision(
        accepted=score >= params.gamma,
        gate_score=score,
        sim=sim,
        displacement=delta,
        anchor_evidence=anchor_evidence,
        bootstrap=bootstrap,
    )


def accept_update(queue: IdentityQueue, embedding: np.ndarray) -> IdentityQueue:
    """Fold an accepted identity embedding into the queue.

    Novel-looking embeddings (max similarity below the novelty floor) are
    appended while capacity allows; otherwise the closest entry is
    momentum-updated and renormalized.
    """
    if not queue.entries:
        return replace(queue, entries=(np.asarray(embedding, dtype=np.float32),))
    sims = [cosine(embedding, q) for q in queue.entries]
    best = int(np.argmax(sims))
    if len(queue.entries) < queue.capacity and sims[best] < queue.novelty_floor:
        return replace(queue, entries=queue.entries + (np.asarray(embedding, dtype=np.float32),))
    mu = queue.momentum
    merged = normalize(
        mu * queue.entries[best].astype(np.float64) + (1.0 - mu) * np.asarray(embedding, np.float64)
    )
    entries = list(queue.entries)
    entries[best] = merged
    return replace(queue, entries=tuple(entries))


def _mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    inter = int(np.count_nonzero(a & b))
    if inter == 0:
        return 0.0
    union = int(np.count_nonzero(a | b))
    return inter / union


def update_anchor_index(mask: np.ndarray, bank: AnchorBank) -> int:
    """Anchor with max mask IoU (ties to the lower index); when every IoU is
    zero, the anchor whose centroid is nearest the mask centroid."""
    if len(bank) == 0:
        raise ValueError("empty anchor bank")
    ious = [_mask_iou(mask, a.mask) for a in bank.anchors]
    best = int(np.argmax(ious))
    if ious[best] > 0.0:
        return best
    mr, mc = mask_centroid(mask)
    dists = [math.hypot(mr - a.centroid[0], mc - a.centroid[1]) for a in bank.anchors]
    return int(np.argmin(dists))
