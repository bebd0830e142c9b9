"""Anchor-gated proposal association: spatial filtering, refinement,
mask-aware pooling, and fusion scoring.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .anchors import AlignmentHeads, AnchorMap
from .core import PerceptionFrame, Proposal, QuerySpec, ZeroVectorError, cosine, normalize


@dataclass(frozen=True)
class AssociationConfig:
    eta: float = 0.05  # anchor-response gate threshold
    lam: float = 0.6  # fusion weight between text similarity and anchor evidence
    theta: float = 0.4  # accept threshold on the fusion score
    refiner: str = "cosine"  # "cosine" (built-in) or "trace" (scores carried in trace)
    refiner_top_n: int = 5
    refiner_floor: float = 0.0
    clamp_cosine: bool = True


@dataclass(frozen=True)
class ScoredCandidate:
    proposal: Proposal
    index: int  # position in the frame's proposal list (tie-break key)
    visual_embedding: np.ndarray | None
    anchor_response_mask: float
    anchor_response_box: float
    fusion_score: float
    rank_score: float  # equals fusion_score unless a search-mode reweight ran

    def reweighted(self, w: float) -> "ScoredCandidate":
        return replace(self, rank_score=self.fusion_score * w)


def anchor_gate(proposals, amap: AnchorMap, eta: float) -> list[Proposal]:
    """Keep proposals whose mean map response over the box is >= eta."""
    kept = []
    for p in proposals:
        b = p.box
        if kernels.box_mean(amap.grid, b.y0, b.y1, b.x0, b.x1) >= eta:
            kept.append(p)
    return kept


def pool_visual(proposal: Proposal, features: np.ndarray) -> np.ndarray:
    """Unit-norm mean of the frame features over the proposal mask."""
    if not proposal.mask.any():
        raise ValueError("cannot pool over an empty mask")
    return normalize(kernels.masked_mean_channels(features, proposal.mask))


def anchor_response(mask: np.ndarray, amap: AnchorMap) -> float:
    """Mean map response over mask pixels."""
    if not mask.any():
        raise ValueError("empty mask")
    return kernels.masked_mean_grid(amap.grid, mask)


def text_embedding(query: QuerySpec, heads: AlignmentHeads) -> np.ndarray:
    return normalize(heads.project_text(query.embedding))


def _clamped_cosine(a: np.ndarray, b: np.ndarray, clamp: bool) -> float:
    c = cosine(a, b)
    return max(0.0, c) if clamp else c


def refine(
    frame: PerceptionFrame,
    query: QuerySpec,
    gated: list[Proposal],
    heads: AlignmentHeads,
    cfg: AssociationConfig,
) -> list[Proposal]:
    """Cut the gated set down to the candidates worth scoring.

    The built-in refiner ranks by text-visual cosine of the mask-pooled
    feature; "trace" uses refiner scores exported alongside the proposals
    (falling back to the built-in ranking when a proposal has none).
    Keeps at most refiner_top_n proposals scoring >= refiner_floor,
    original order preserved.
    """
    if not gated:
        return []
    try:
        g_l = text_embedding(query, heads)
    except ZeroVectorError:
        return []

    scored = []
    for i, p in enumerate(gated):
        if cfg.refiner == "trace" and p.refiner_score is not None:
            s = p.refiner_score
        else:
            try:
                s = _clamped_cosine(pool_visual(p, frame.features), g_l, cfg.clamp_cosine)
            except ZeroVectorError:
                continue
        if s >= cfg.refiner_floor:
            scored.append((s, i, p))
    scored.sort(key=lambda t: (-t[0], t[1]))
    kept = sorted(scored[: cfg.refiner_top_n], key=lambda t: t[1])
    return [p for _, _, p in kept]


def fusion_score(
    visual_embedding: np.ndarray,
    text_emb: np.ndarray,
    anchor_resp: float,
    lam: float,
    clamp: bool = True,
) -> float:
    """lam * cos(visual, text) + (1 - lam) * anchor response."""
    try:
        c = _clamped_cosine(visual_embedding, text_emb, clamp)
    except ZeroVectorError:
        return 0.0
    return lam * c + (1.0 - lam) * anchor_resp


def score_candidates(
    frame: PerceptionFrame,
    query: QuerySpec,
    refined: list[Proposal],
    amap: AnchorMap,
    heads: AlignmentHeads,
    cfg: AssociationConfig,
    use_anchor_map: bool = True,
) -> list[ScoredCandidate]:
    """Pool, measure anchor responses, and fuse; failed poolings score 0."""
    try:
        g_l = text_embedding(query, heads)
    except ZeroVectorError:
        g_l = None
    out = []
    for i, p in enumerate(refined):
        a_box = kernels.box_mean(amap.grid, p.box.y0, p.box.y1, p.box.x0, p.box.x1)
        a_mask = anchor_response(p.mask, amap)
        g_v = None
        if g_l is None:
            score = 0.0
        else:
            try:
                g_v = pool_visual(p, frame.features)
            except ZeroVectorError:
                score = 0.0
            else:
                resp = a_mask if use_anchor_map else 0.0
                lam = cfg.lam if use_anchor_map else 1.0
                score = fusion_score(g_v, g_l, resp, lam, cfg.clamp_cosine)
        out.append(
            ScoredCandidate(
                proposal=p,
                index=i,
                visual_embedding=g_v,
                anchor_response_mask=a_mask,
                anchor_response_box=a_box,
                fusion_score=score,
                rank_score=score,
            )
        )
    return out


def pick_best(candidates: list[ScoredCandidate], theta: float) -> ScoredCandidate | None:
    """Argmax by rank score (ties to the lower index); None when the winner's
    fusion score falls below theta or the list is empty."""
    if not candidates:
        return None
    best = max(candidates, key=lambda c: (c.rank_score, -c.index))
    if best.fusion_score < theta:
        return None
    return best
