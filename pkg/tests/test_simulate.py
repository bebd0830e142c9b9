import numpy as np
import pytest

from anchorref import simulate as sim
from anchorref.container import fingerprint_frames
from anchorref.core import validate_trace
from anchorref.metrics import ABSENT, VISIBLE


def test_generate_is_bit_identical_per_seed():
    spec = sim.make_suite("ablation", [3])[0]
    a, gta = sim.generate(spec)
    b, gtb = sim.generate(spec)
    assert fingerprint_frames(a.frames, len(a.frames)) == fingerprint_frames(
        b.frames, len(b.frames)
    )
    assert np.array_equal(a.queries[0].embedding, b.queries[0].embedding)
    assert gta.visibility == gtb.visibility
    assert gta.reentry_events == gtb.reentry_events
    for fa, fb in zip(a.frames, b.frames):
        for pa, pb in zip(fa.proposals, fb.proposals):
            assert pa.box == pb.box
            assert np.array_equal(pa.identity_embedding, pb.identity_embedding)


def test_different_seeds_differ():
    a, _ = sim.generate(sim.make_suite("clean", [0])[0])
    b, _ = sim.generate(sim.make_suite("clean", [1])[0])
    assert fingerprint_frames(a.frames, 3) != fingerprint_frames(b.frames, 3)


@pytest.mark.parametrize("family", ["clean", "ablation", "gating", "latency"])
def test_every_family_passes_validation(family):
    trace, gt = sim.generate(sim.make_suite(family, [5])[0])
    report = validate_trace(trace.frames, trace.queries[0])
    assert report.ok, report.violations
    assert len(gt) == len(trace.frames)


def test_reentry_events_match_script():
    spec = sim.make_suite("clean", [2])[0]
    _, gt = sim.generate(spec)
    assert gt.reentry_events == sorted(s.start for s in spec.segments)
    for t_re in gt.reentry_events:
        assert gt.visibility[t_re] == VISIBLE
        assert t_re == 0 or gt.visibility[t_re - 1] == ABSENT


def test_single_scripted_absence_yields_single_event():
    base = sim.make_suite("clean", [0])[0]
    spec = sim.ScenarioSpec(
        **{**base.to_json(), "structures": base.structures, "segments": ()},
    )
    segments = (sim.VisibleSegment(66, 120), sim.VisibleSegment(220, 260))  # 100-frame absence
    spec = sim.ScenarioSpec(**{**spec.to_json(), "structures": base.structures,
                               "segments": segments, "num_frames": 280})
    _, gt = sim.generate(spec)
    assert gt.reentry_events == [66, 220]
    assert gt.visibility[120:220] == [ABSENT] * 100


def test_ablation_suite_properties():
    specs = sim.make_suite("ablation", list(range(6)))
    for spec in specs:
        assert len(spec.segments) >= 3  # first appearance plus >= 2 re-entries
        assert spec.distractors
        _, gt = sim.generate(spec)
        assert len(gt.reentry_events) >= 3


def test_gating_suite_has_high_similarity_distractors():
    for spec in sim.make_suite("gating", [0, 1, 2]):
        assert spec.num_frames == 600
        assert any(d.appearance_similarity >= 0.9 for d in spec.distractors)
        assert all(d.identity_similarity <= 0.1 for d in spec.distractors)


def test_latency_suite_covers_strata():
    specs = sim.make_suite("latency", list(range(6)))
    strata = set()
    for spec in specs:
        _, gt = sim.generate(spec)
        strata.add(gt.absence_stratum())
    assert strata == {"short", "medium", "long"}


def test_spec_json_roundtrip(tmp_path):
    spec = sim.make_suite("ablation", [9])[0]
    spec.save(tmp_path / "s.json")
    loaded = sim.ScenarioSpec.load(tmp_path / "s.json")
    assert loaded == spec
    a, _ = sim.generate(spec)
    b, _ = sim.generate(loaded)
    assert fingerprint_frames(a.frames, 3) == fingerprint_frames(b.frames, 3)


def test_invalid_specs_rejected():
    base = sim.make_suite("clean", [0])[0]
    with pytest.raises(ValueError, match="structure"):
        sim.generate(sim.ScenarioSpec(**{**base.to_json(), "structures": (),
                                         "segments": base.segments}))
    with pytest.raises(ValueError, match="d_l"):
        sim.generate(sim.ScenarioSpec(**{**base.to_json(), "structures": base.structures,
                                         "segments": base.segments, "d_l": 8}))


def test_distractor_ground_truth_boxes_present():
    spec = sim.make_suite("gating", [1])[0]
    trace, gt = sim.generate(spec)
    assert gt.distractor_boxes
    frames_with_distractor = sorted(gt.distractor_boxes[0])
    assert frames_with_distractor
    t = frames_with_distractor[0]
    assert gt.visibility[t] == ABSENT
    # the distractor really is in the trace at that frame
    assert any(p.box == gt.distractor_boxes[0][t] for p in trace.frames[t].proposals)


def test_default_scenario_matches_full_scale():
    spec = sim.default_scenario(0)
    assert (spec.height, spec.width, spec.d_v, spec.d_l) == (128, 128, 32, 32)
    assert spec.num_frames == 600


def test_prng_note_recorded():
    trace, _ = sim.generate(sim.make_suite("clean", [0])[0])
    assert trace.prng and "PCG64" in trace.prng
