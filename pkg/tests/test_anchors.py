import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorref.anchors import (
    align_query,
    build_bank,
    centroid,
    make_heads,
    pool_prototype,
    select_median_brightness_frame,
    softmax,
)
from anchorref.core import BBox, EmptySceneError, QuerySpec
from conftest import make_frame, make_mask


class TestMedianBrightness:
    def test_odd_count(self):
        frames = [make_frame(i, brightness=b) for i, b in enumerate([10, 50, 30])]
        assert select_median_brightness_frame(frames) == 2  # value 30

    def test_single_frame(self):
        assert select_median_brightness_frame([make_frame(0, brightness=1.0)]) == 0

    def test_lower_median_first_occurrence(self):
        frames = [make_frame(i, brightness=b) for i, b in enumerate([10, 20, 20, 40])]
        # sorted [10, 20, 20, 40] -> lower median 20, first occurrence index 1
        assert select_median_brightness_frame(frames) == 1

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=20))
    @settings(max_examples=60)
    def test_matches_sorting_oracle(self, values):
        frames = [make_frame(i, brightness=b) for i, b in enumerate(values)]
        idx = select_median_brightness_frame(frames)
        target = sorted(values)[(len(values) - 1) // 2]
        assert values[idx] == target
        assert idx == values.index(target)


class TestPoolPrototype:
    def test_constant_field(self):
        feats = np.zeros((8, 8, 3), dtype=np.float32)
        feats[:] = [1.0, 2.0, 2.0]
        mask = make_mask(8, 8, BBox(1, 1, 4, 4))
        assert np.allclose(pool_prototype(mask, feats), [1 / 3, 2 / 3, 2 / 3], atol=1e-6)

    def test_two_pixel_average(self):
        feats = np.zeros((2, 2, 2), dtype=np.float32)
        feats[0, 0] = [1.0, 0.0]
        feats[0, 1] = [0.0, 1.0]
        mask = np.zeros((2, 2), dtype=bool)
        mask[0, :] = True
        assert np.allclose(pool_prototype(mask, feats), [0.7071, 0.7071], atol=1e-4)

    def test_full_image_matches_double_loop(self):
        rng = np.random.default_rng(11)
        feats = rng.standard_normal((32, 32, 5)).astype(np.float32)
        mask = np.ones((32, 32), dtype=bool)
        acc = np.zeros(5)
        for r in range(32):
            for c in range(32):
                acc += feats[r, c]
        want = acc / (32 * 32)
        want = want / np.linalg.norm(want)
        assert np.abs(pool_prototype(mask, feats) - want).max() < 1e-5


class TestCentroid:
    def test_single_pixel(self):
        mask = np.zeros((10, 10), dtype=bool)
        mask[5, 7] = True
        assert centroid(mask) == (5.0, 7.0)

    def test_block(self):
        assert centroid(make_mask(8, 8, BBox(4, 2, 6, 4))) == (2.5, 4.5)

    def test_symmetric_cross(self):
        mask = np.zeros((9, 9), dtype=bool)
        mask[4, :] = True
        mask[:, 4] = True
        assert centroid(mask) == (4.0, 4.0)


def _static_frames(n=4, h=16, w=16, d=4, region=BBox(2, 2, 10, 10)):
    """Features constant over the region, flickering elsewhere."""
    rng = np.random.default_rng(12)
    frames = []
    for i in range(n):
        feats = rng.standard_normal((h, w, d)).astype(np.float32)
        feats[region.y0 : region.y1, region.x0 : region.x1] = [0.5, 0.5, 0.0, 0.0]
        frames.append(make_frame(i, h, w, d, features=feats, brightness=0.5 + 0.01 * i))
    return frames


class TestBuildBank:
    def test_single_static_region(self):
        frames = _static_frames()
        bank = build_bank(frames, k=3, static_threshold=1e-3, min_region_px=4)
        assert len(bank) == 1 and bank.truncated
        want = make_mask(16, 16, BBox(2, 2, 10, 10))
        assert np.array_equal(bank.anchors[0].mask, want)
        assert np.allclose(bank.anchors[0].prototype, [0.7071, 0.7071, 0, 0], atol=1e-4)

    def test_all_dynamic_raises(self):
        rng = np.random.default_rng(13)
        frames = [
            make_frame(i, features=rng.standard_normal((16, 16, 4)).astype(np.float32))
            for i in range(4)
        ]
        with pytest.raises(EmptySceneError):
            build_bank(frames, k=2, static_threshold=1e-3)

    def test_simulator_structures_recovered(self, clean_run):
        bank, spec = clean_run["bank"], clean_run["spec"]
        assert len(bank) == len(spec.structures)
        planted = sorted(s.centroid for s in spec.structures)
        found = sorted(a.centroid for a in bank.anchors)
        for (pr, pc), (fr, fc) in zip(planted, found):
            assert abs(pr - fr) <= 1.0 and abs(pc - fc) <= 1.0

    def test_rerun_hash_stable(self, clean_run):
        trace, cfg = clean_run["trace"], clean_run["cfg"]
        again = build_bank(
            trace.frames[: cfg.anchor_t0], cfg.anchor_k, cfg.anchor_static_threshold
        )
        assert again.content_hash() == clean_run["bank"].content_hash()
        assert again.trace_hash == clean_run["bank"].trace_hash

    def test_needs_two_frames(self):
        with pytest.raises(ValueError):
            build_bank(_static_frames(n=1), k=1)


class TestSoftmax:
    def test_paper_default_example(self):
        w = softmax(np.array([1.0, 0.0]), tau=10.0)
        assert w[0] == pytest.approx(0.999955, abs=1e-6)
        assert w[1] == pytest.approx(4.54e-5, abs=1e-6)

    def test_equal_scores_uniform(self):
        w = softmax(np.full(5, 0.3), tau=10.0)
        assert np.allclose(w, 0.2, atol=1e-12)

    @given(
        st.lists(st.floats(-1, 1), min_size=2, max_size=8),
        st.floats(0.1, 50.0),
    )
    @settings(max_examples=80)
    def test_simplex_and_shift_invariance(self, scores, tau):
        s = np.array(scores)
        w = softmax(s, tau)
        assert w.sum() == pytest.approx(1.0, abs=1e-6)
        assert (w > 0).all()
        shifted = softmax(s + 0.37, tau)
        assert np.abs(w - shifted).max() < 1e-6

    @given(st.lists(st.floats(-1, 1), min_size=2, max_size=6), st.integers(0, 5))
    @settings(max_examples=60)
    def test_monotone_in_raised_score(self, scores, j):
        s = np.array(scores)
        j = j % len(s)
        w0 = softmax(s, 10.0)
        s2 = s.copy()
        s2[j] += 0.1
        w1 = softmax(s2, 10.0)
        assert w1[j] > w0[j]


class TestAlignQuery:
    def test_single_anchor_map_equals_mask(self):
        frames = _static_frames()
        bank = build_bank(frames, k=1, static_threshold=1e-3, min_region_px=4)
        heads = make_heads(4, 4, tau=10.0)
        q = QuerySpec(text="q", embedding=np.array([1, 0, 0, 0], dtype=np.float32))
        amap = align_query(q, bank, heads)
        assert amap.weights.tolist() == [1.0]
        assert np.array_equal(amap.grid > 0, bank.anchors[0].mask)
        assert set(np.unique(amap.grid)) <= {0.0, 1.0}

    def test_map_bounds_and_weights(self, clean_run):
        amap = clean_run["amap"]
        assert amap.weights.sum() == pytest.approx(1.0, abs=1e-6)
        assert float(amap.grid.min()) >= 0.0
        assert float(amap.grid.max()) <= 1.0 + 1e-6

    def test_deterministic(self, clean_run):
        amap = clean_run["amap"]
        again = align_query(clean_run["trace"].queries[0], clean_run["bank"], clean_run["heads"])
        assert np.array_equal(again.grid, amap.grid)
        assert np.array_equal(again.weights, amap.weights)
        assert again.query_fingerprint == amap.query_fingerprint


class TestHeads:
    def test_identity_when_dims_match(self):
        heads = make_heads(6, 6, tau=10.0)
        v = np.arange(6, dtype=np.float32)
        assert np.allclose(heads.project_text(v), v)
        assert np.allclose(heads.project_visual(v), v)

    def test_orthonormal_projection_when_dims_differ(self):
        heads = make_heads(12, 8, tau=10.0, seed=4)
        assert heads.w_l.shape == (12, 8)
        assert heads.w_v.shape == (8, 8)
        gram = heads.w_l.T @ heads.w_l
        assert np.abs(gram - np.eye(8)).max() < 1e-5

    def test_seed_changes_projection(self):
        a = make_heads(12, 8, tau=10.0, seed=1)
        b = make_heads(12, 8, tau=10.0, seed=2)
        assert not np.allclose(a.w_l, b.w_l)
