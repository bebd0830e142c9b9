import numpy as np
import pytest

from anchorref.core import BBox, PerceptionFrame, Proposal, QuerySpec, normalize


def make_mask(h, w, box: BBox) -> np.ndarray:
    mask = np.zeros((h, w), dtype=bool)
    mask[box.y0 : box.y1, box.x0 : box.x1] = True
    return mask


def make_proposal(h, w, box: BBox, embedding=None, score=0.9, refiner_score=None) -> Proposal:
    if embedding is None:
        embedding = np.zeros(8, dtype=np.float32)
        embedding[0] = 1.0
    return Proposal(
        box=box,
        mask=make_mask(h, w, box),
        identity_embedding=np.asarray(embedding, dtype=np.float32),
        detector_score=score,
        refiner_score=refiner_score,
    )


def make_frame(index, h=16, w=16, d=8, proposals=(), brightness=0.5, features=None) -> PerceptionFrame:
    if features is None:
        features = np.full((h, w, d), 0.1, dtype=np.float32)
    return PerceptionFrame(
        frame_index=index,
        features=np.asarray(features, dtype=np.float32),
        proposals=tuple(proposals),
        mean_brightness=brightness,
    )


def make_query(d=8, text="a thing") -> QuerySpec:
    v = np.zeros(d, dtype=np.float32)
    v[0] = 1.0
    return QuerySpec(text=text, embedding=v)


def random_unit(rng, d):
    return normalize(rng.standard_normal(d))


@pytest.fixture(scope="session")
def clean_run():
    """One clean scenario run end to end; several tests inspect it."""
    from anchorref import metrics, pipeline
    from anchorref import simulate as sim
    from anchorref.anchors import align_query, build_bank, make_heads
    from anchorref.config import RunConfig, apply_overrides

    spec = sim.make_suite("clean", [7])[0]
    trace, gt = sim.generate(spec)
    cfg = apply_overrides(RunConfig(), sim.recommended_overrides(spec))
    bank = build_bank(trace.frames[: cfg.anchor_t0], cfg.anchor_k, cfg.anchor_static_threshold)
    heads = make_heads(trace.d_l, trace.d_v, cfg.anchor_tau)
    amap = align_query(trace.queries[0], bank, heads)
    result = pipeline.run(trace, trace.queries[0], bank, cfg, heads=heads, amap=amap)
    report = metrics.evaluate(result.trajectory, gt)
    return {
        "spec": spec,
        "trace": trace,
        "gt": gt,
        "cfg": cfg,
        "bank": bank,
        "heads": heads,
        "amap": amap,
        "result": result,
        "report": report,
    }
