import json
import struct

import numpy as np
import pytest

from anchorref.container import (
    BlobWriter,
    TraceData,
    load_trace,
    read_mask,
    read_tensor,
    save_trace,
)
from anchorref.core import BBox, QuerySpec, TraceFormatError
from conftest import make_frame, make_proposal


def test_tensor_block_layout():
    w = BlobWriter()
    arr = np.arange(6, dtype=np.float32).reshape(2, 3)
    off = w.write_tensor(arr)
    blob = w.getvalue()
    assert off == 0
    assert blob[:8] == b"AR2TENSR"
    assert struct.unpack_from("<I", blob, 8) == (2,)
    assert struct.unpack_from("<II", blob, 12) == (2, 3)
    assert np.frombuffer(blob, dtype="<f4", count=6, offset=20).tolist() == list(range(6))


def test_mask_block_layout_msb_first():
    w = BlobWriter()
    mask = np.zeros((2, 10), dtype=bool)
    mask[0, 0] = True  # first bit of the row -> high bit of byte 0
    mask[1, 9] = True
    w.write_mask(mask)
    blob = w.getvalue()
    assert blob[:8] == b"AR2MASKB"
    assert struct.unpack_from("<II", blob, 8) == (2, 10)
    rows = blob[16:]
    assert len(rows) == 2 * 2  # ceil(10/8) = 2 bytes per row
    assert rows[0] == 0b10000000
    assert rows[3] == 0b01000000  # bit 9 -> second byte, second-highest bit


def test_tensor_mask_roundtrip():
    rng = np.random.default_rng(1)
    w = BlobWriter()
    t = rng.standard_normal((3, 4, 5)).astype(np.float32)
    m = rng.random((11, 7)) > 0.5
    off_t = w.write_tensor(t)
    off_m = w.write_mask(m)
    blob = w.getvalue()
    assert np.array_equal(read_tensor(blob, off_t), t)
    assert np.array_equal(read_mask(blob, off_m), m)


def test_bad_magic_raises():
    with pytest.raises(TraceFormatError):
        read_tensor(b"NOTMAGIC" + b"\x00" * 16, 0)
    with pytest.raises(TraceFormatError):
        read_mask(b"NOTMAGIC" + b"\x00" * 16, 0)


def _toy_trace():
    rng = np.random.default_rng(2)
    frames = []
    for i in range(3):
        emb = rng.standard_normal(8)
        emb = (emb / np.linalg.norm(emb)).astype(np.float32)
        proposals = [
            make_proposal(16, 16, BBox(2, 2, 6, 6), embedding=emb, score=0.7, refiner_score=0.5)
        ]
        frames.append(
            make_frame(
                i,
                proposals=proposals,
                brightness=0.4 + 0.1 * i,
                features=rng.standard_normal((16, 16, 8)).astype(np.float32),
            )
        )
    q = QuerySpec(text="toy", embedding=np.eye(8, dtype=np.float32)[0])
    return TraceData(frames=frames, queries=[q], prng="test")


def test_trace_roundtrip_bit_identical(tmp_path):
    trace = _toy_trace()
    path = tmp_path / "trace.json"
    save_trace(trace, path)
    loaded = load_trace(path)

    assert len(loaded.frames) == 3
    assert loaded.prng == "test"
    assert loaded.queries[0].text == "toy"
    assert np.array_equal(loaded.queries[0].embedding, trace.queries[0].embedding)
    for a, b in zip(loaded.frames, trace.frames):
        assert a.frame_index == b.frame_index
        assert a.mean_brightness == b.mean_brightness
        assert np.array_equal(a.features, b.features)
        for pa, pb in zip(a.proposals, b.proposals):
            assert pa.box == pb.box
            assert np.array_equal(pa.mask, pb.mask)
            assert np.array_equal(pa.identity_embedding, pb.identity_embedding)
            assert pa.detector_score == pytest.approx(pb.detector_score, abs=1e-7)
            assert pa.refiner_score == pb.refiner_score


def test_save_is_deterministic(tmp_path):
    trace = _toy_trace()
    save_trace(trace, tmp_path / "a.json")
    save_trace(trace, tmp_path / "b.json")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    a = (tmp_path / "a.json").read_text().replace("a.bin", "x.bin")
    b = (tmp_path / "b.json").read_text().replace("b.bin", "x.bin")
    assert a == b


def test_manifest_fields(tmp_path):
    save_trace(_toy_trace(), tmp_path / "t.json")
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["format_version"] == 1
    assert (doc["H"], doc["W"], doc["d_v"], doc["d_l"]) == (16, 16, 8, 8)
    assert doc["num_frames"] == 3
    assert doc["queries"][0]["text"] == "toy"
    rec = doc["frames"][0]
    assert set(rec) >= {"frame_index", "mean_brightness", "feature_offset",
                        "proposal_count", "proposal_offsets"}
    assert rec["proposal_count"] == len(rec["proposal_offsets"]) == 1
    assert rec["refiner_scores"] == [0.5]


def test_load_missing_blob(tmp_path):
    save_trace(_toy_trace(), tmp_path / "t.json")
    (tmp_path / "t.bin").unlink()
    with pytest.raises(TraceFormatError):
        load_trace(tmp_path / "t.json")


def test_load_bad_version(tmp_path):
    save_trace(_toy_trace(), tmp_path / "t.json")
    doc = json.loads((tmp_path / "t.json").read_text())
    doc["format_version"] = 99
    (tmp_path / "t.json").write_text(json.dumps(doc))
    with pytest.raises(TraceFormatError):
        load_trace(tmp_path / "t.json")


def test_bank_roundtrip(tmp_path, clean_run):
    from anchorref.container import load_bank, save_bank

    bank = clean_run["bank"]
    save_bank(bank, tmp_path / "bank.json")
    loaded = load_bank(tmp_path / "bank.json")
    assert len(loaded) == len(bank)
    assert loaded.t_star == bank.t_star
    assert loaded.trace_hash == bank.trace_hash
    assert loaded.content_hash() == bank.content_hash()


def test_heads_roundtrip(tmp_path):
    from anchorref.anchors import make_heads
    from anchorref.container import load_heads, save_heads

    heads = make_heads(12, 8, tau=10.0, seed=3)
    save_heads(heads, tmp_path / "heads.json")
    loaded = load_heads(tmp_path / "heads.json")
    assert loaded.tau == heads.tau
    assert np.array_equal(loaded.w_l, heads.w_l)
    assert np.array_equal(loaded.w_v, heads.w_v)
