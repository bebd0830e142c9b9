"""Per-frame engine loop.

Each frame takes exactly one of two paths:
  * reject (no proposals survive, fusion below theta, or the identity gate
    says no) -> emit absent, diffuse the re-entry prior;
  * accept -> emit the winning box, fold its identity into the queue,
    re-attach to the best-overlapping anchor, redirect the prior there.

The mode recorded for frame t reflects the previous frame's emission:
"searching" iff frame t-1 emitted absent. Candidate ranking is reweighted
by the prior only while searching; the theta test always reads the raw
fusion score so acceptance stays calibrated to [0, 1].
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import association as assoc
from . import gate as gating
from . import prior as reentry
from .anchors import AlignmentHeads, AnchorBank, AnchorMap, align_query, make_heads
from .config import RunConfig
from .container import TraceData, load_heads
from .core import PerceptionFrame, QuerySpec, TrajectoryEntry

MODE_TRACKING = "tracking"
MODE_SEARCHING = "searching"


@dataclass
class EngineState:
    mode: str
    prior: reentry.ReentryPrior
    queue: gating.IdentityQueue
    k_star: int | None
    frame_cursor: int


@dataclass
class FrameDiagnostics:
    frame: int
    mode: str
    n_proposals: int
    n_gated: int
    n_refined: int
    reject_stage: str | None  # gate | refine | fusion | reid | None (accepted)
    best_fusion: float | None
    best_rank: float | None
    picked_index: int | None
    gate_score: float | None
    gate_sim: float | None
    gate_displacement: float | None
    gate_anchor_evidence: float | None
    accepted: bool
    k_star: int | None
    prior_sum: float
    prior_min: float

    def as_record(self) -> dict:
        return {
            "frame": self.frame,
            "mode": self.mode,
            "n_proposals": self.n_proposals,
            "n_gated": self.n_gated,
            "n_refined": self.n_refined,
            "reject_stage": self.reject_stage,
            "best_fusion": self.best_fusion,
            "best_rank": self.best_rank,
            "picked_index": self.picked_index,
            "gate_score": self.gate_score,
            "gate_sim": self.gate_sim,
            "gate_displacement": self.gate_displacement,
            "gate_anchor_evidence": self.gate_anchor_evidence,
            "accepted": self.accepted,
            "k_star": self.k_star,
            "prior_sum": self.prior_sum,
            "prior_min": self.prior_min,
        }


@dataclass
class RunResult:
    trajectory: list[TrajectoryEntry]
    diagnostics: list[FrameDiagnostics]
    prior_snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)


def resolve_heads(config: RunConfig, d_l: int, d_v: int) -> AlignmentHeads:
    if config.heads_path:
        return load_heads(config.heads_path)
    return make_heads(d_l, d_v, tau=config.anchor_tau, seed=config.heads_seed, dim=config.heads_dim)


def init_state(amap: AnchorMap, config: RunConfig) -> EngineState:
    prior = reentry.init_prior(
        amap, sigma=config.prior_sigma, beta=config.prior_beta, rho=config.prior_rho
    )
    queue = gating.IdentityQueue(
        capacity=config.gate_q_max,
        momentum=config.gate_mu,
        novelty_floor=config.gate_novelty_floor,
    )
    return EngineState(
        mode=MODE_TRACKING, prior=prior, queue=queue, k_star=None, frame_cursor=0
    )


def step(
    state: EngineState,
    frame: PerceptionFrame,
    query: QuerySpec,
    bank: AnchorBank,
    amap: AnchorMap,
    heads: AlignmentHeads,
    config: RunConfig,
) -> tuple[EngineState, TrajectoryEntry, FrameDiagnostics]:
    """Process one frame; exactly one prior update (diffuse or redirect) happens."""
    acfg = config.association()
    t = state.frame_cursor
    mode = state.mode
    proposals = list(frame.proposals)

    gated = (
        assoc.anchor_gate(proposals, amap, acfg.eta) if config.use_anchor_map else proposals
    )
    refined = assoc.refine(frame, query, gated, heads, acfg) if gated else []
    candidates = assoc.score_candidates(
        frame, query, refined, amap, heads, acfg, use_anchor_map=config.use_anchor_map
    )

    searching = mode == MODE_SEARCHING
    if searching and config.use_reentry_prior and candidates:
        candidates = reentry.reweight(candidates, amap, state.prior)
    best = assoc.pick_best(candidates, acfg.theta)

    reject_stage = None
    decision = None
    if not gated:
        reject_stage = "gate"
    elif not refined:
        reject_stage = "refine"
    elif best is None:
        reject_stage = "fusion"
    elif config.use_reid_gate:
        anchor_centroid = bank.anchors[state.k_star].centroid if state.k_star is not None else None
        evidence = best.anchor_response_mask if config.use_anchor_map else 0.0
        decision = gating.gate(
            best.proposal.identity_embedding,
            evidence,
            best.proposal.mask,
            state.queue,
            config.gate_params(),
            anchor_centroid,
            bank.height,
            bank.width,
        )
        if not decision.accepted:
            reject_stage = "reid"

    if reject_stage is None and best is not None:
        new_queue = gating.accept_update(state.queue, best.proposal.identity_embedding)
        k_star = gating.update_anchor_index(best.proposal.mask, bank)
        new_prior = reentry.redirect(state.prior, bank.anchors[k_star].centroid, amap)
        if decision is not None:
            decision = gating.GateDecision(
                accepted=True,
                gate_score=decision.gate_score,
                sim=decision.sim,
                displacement=decision.displacement,
                anchor_evidence=decision.anchor_evidence,
                bootstrap=decision.bootstrap,
                new_anchor_index=k_star,
            )
        entry = TrajectoryEntry(
            frame=t,
            box=best.proposal.box,
            score=best.fusion_score,
            gate_score=decision.gate_score if decision is not None else None,
            mode=mode,
        )
        new_state = EngineState(
            mode=MODE_TRACKING,
            prior=new_prior,
            queue=new_queue,
            k_star=k_star,
            frame_cursor=t + 1,
        )
    else:
        new_prior = reentry.search_update(state.prior, amap)
        entry = TrajectoryEntry(frame=t, box=None, score=None, gate_score=None, mode=mode)
        new_state = EngineState(
            mode=MODE_SEARCHING,
            prior=new_prior,
            queue=state.queue,
            k_star=state.k_star,
            frame_cursor=t + 1,
        )

    diag = FrameDiagnostics(
        frame=t,
        mode=mode,
        n_proposals=len(proposals),
        n_gated=len(gated),
        n_refined=len(refined),
        reject_stage=reject_stage,
        best_fusion=best.fusion_score if best is not None else None,
        best_rank=best.rank_score if best is not None else None,
        picked_index=best.index if best is not None else None,
        gate_score=decision.gate_score if decision is not None else None,
        gate_sim=decision.sim if decision is not None else None,
        gate_displacement=decision.displacement if decision is not None else None,
        gate_anchor_evidence=decision.anchor_evidence if decision is not None else None,
        accepted=reject_stage is None and best is not None,
        k_star=new_state.k_star,
        prior_sum=float(new_state.prior.grid.sum(dtype=np.float64)),
        prior_min=float(new_state.prior.grid.min()),
    )
    return new_state, entry, diag


def run(
    trace: TraceData,
    query: QuerySpec,
    bank: AnchorBank,
    config: RunConfig,
    heads: AlignmentHeads | None = None,
    amap: AnchorMap | None = None,
    snapshot_prior: bool = False,
) -> RunResult:
    """Run the full loop over a trace for one query.

    The anchor map is aligned once before the loop and never mutated.
    Raises ValueError when the bank extent disagrees with the trace.
    """
    config.validate()
    h, w = trace.extent
    if (bank.height, bank.width) != (h, w):
        raise ValueError(
            f"bank extent {bank.height}x{bank.width} != trace extent {h}x{w}"
        )
    if heads is None:
        heads = resolve_heads(config, d_l=query.embedding.shape[0], d_v=trace.d_v)
    if amap is None:
        amap = align_query(query, bank, heads)

    state = init_state(amap, config)
    trajectory: list[TrajectoryEntry] = []
    diagnostics: list[FrameDiagnostics] = []
    snapshots: list[tuple[int, np.ndarray]] = []
    for i in range(len(trace.frames)):
        state, entry, diag = step(state, trace.frames[i], query, bank, amap, heads, config)
        trajectory.append(entry)
        diagnostics.append(diag)
        if snapshot_prior:
            snapshots.append((i, state.prior.grid.astype(np.float32)))
    return RunResult(trajectory=trajectory, diagnostics=diagnostics, prior_snapshots=snapshots)
