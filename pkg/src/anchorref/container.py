"""Perception-trace container: JSON manifest + little-endian binary blob.

Blob layout (all integers little-endian):
  tensor block: 8-byte magic "AR2TENSR", u32 rank, u32 dims[rank],
                raw float32 payload (prod(dims) * 4 bytes, row-major);
  mask block:   8-byte magic "AR2MASKB", u32 height, u32 width, then
                height rows of ceil(width/8) bytes, bits packed MSB-first.

Manifest offsets are byte offsets into the blob. A proposal at offset o is
three consecutive blocks: a 5-float tensor [x0, y0, x1, y1, detector_score],
the proposal mask, and the identity-embedding tensor.
"""
from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BBox, PerceptionFrame, Proposal, QuerySpec, TraceFormatError

FORMAT_VERSION = 1
MAGIC_TENSOR = b"AR2TENSR"
MAGIC_MASK = b"AR2MASKB"


class BlobWriter:
    def __init__(self) -> None:
        self._buf = io.BytesIO()

    @property
    def size(self) -> int:
        return self._buf.tell()

    def write_tensor(self, arr: np.ndarray) -> int:
        offset = self._buf.tell()
        arr = np.ascontiguousarray(arr, dtype="<f4")
        self._buf.write(MAGIC_TENSOR)
        self._buf.write(struct.pack("<I", arr.ndim))
        self._buf.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        self._buf.write(arr.tobytes())
        return offset

    def write_mask(self, mask: np.ndarray) -> int:
        offset = self._buf.tell()
        mask = np.ascontiguousarray(mask, dtype=bool)
        h, w = mask.shape
        self._buf.write(MAGIC_MASK)
        self._buf.write(struct.pack("<II", h, w))
        self._buf.write(np.packbits(mask, axis=1).tobytes())
        return offset

    def getvalue(self) -> bytes:
        return self._buf.getvalue()


def read_tensor(blob: bytes, offset: int) -> np.ndarray:
    if blob[offset : offset + 8] != MAGIC_TENSOR:
        raise TraceFormatError(f"bad tensor magic at offset {offset}")
    pos = offset + 8
    (rank,) = struct.unpack_from("<I", blob, pos)
    pos += 4
    if rank > 8:
        raise TraceFormatError(f"implausible tensor rank {rank} at offset {offset}")
    dims = struct.unpack_from(f"<{rank}I", blob, pos)
    pos += 4 * rank
    count = int(np.prod(dims)) if rank else 1
    arr = np.frombuffer(blob, dtype="<f4", count=count, offset=pos)
    return arr.reshape(dims).copy()


def read_mask(blob: bytes, offset: int) -> np.ndarray:
    if blob[offset : offset + 8] != MAGIC_MASK:
        raise TraceFormatError(f"bad mask magic at offset {offset}")
    h, w = struct.unpack_from("<II", blob, offset + 8)
    row_bytes = (w + 7) // 8
    pos = offset + 16
    raw = np.frombuffer(blob, dtype=np.uint8, count=h * row_bytes, offset=pos)
    bits = np.unpackbits(raw.reshape(h, row_bytes), axis=1)[:, :w]
    return bits.astype(bool)


@dataclass
class TraceData:
    """A loaded (or in-memory) trace: frames plus its query list."""

    frames: list[PerceptionFrame]
    queries: list[QuerySpec]
    ground_truth: str | None = None
    prng: str | None = None
    extra: dict = field(default_factory=dict)

    @property
    def extent(self) -> tuple[int, int]:
        h, w, _ = self.frames[0].features.shape
        return h, w

    @property
    def d_v(self) -> int:
        return self.frames[0].features.shape[2]

    @property
    def d_l(self) -> int:
        return self.queries[0].embedding.shape[0]


def save_trace(trace: TraceData, manifest_path: str | Path) -> None:
    manifest_path = Path(manifest_path)
    blob_name = manifest_path.stem + ".bin"
    writer = BlobWriter()

    queries = []
    for q in trace.queries:
        queries.append({"text": q.text, "embedding_offset": writer.write_tensor(q.embedding)})

    frames = []
    for f in trace.frames:
        offsets = []
        refiner_scores = []
        any_refined = False
        for p in f.proposals:
            header = np.array(
                [p.box.x0, p.box.y0, p.box.x1, p.box.y1, p.detector_score], dtype=np.float32
            )
            off = writer.write_tensor(header)
            writer.write_mask(p.mask)
            writer.write_tensor(p.identity_embedding)
            offsets.append(off)
            refiner_scores.append(p.refiner_score)
            any_refined = any_refined or p.refiner_score is not None
        rec = {
            "frame_index": f.frame_index,
            "mean_brightness": f.mean_brightness,
            "feature_offset": writer.write_tensor(f.features),
            "proposal_count": len(f.proposals),
            "proposal_offsets": offsets,
        }
        if any_refined:
            rec["refiner_scores"] = refiner_scores
        frames.append(rec)

    h, w = trace.extent
    manifest = {
        "format_version": FORMAT_VERSION,
        "H": h,
        "W": w,
        "d_v": trace.d_v,
        "d_l": trace.d_l,
        "num_frames": len(trace.frames),
        "blob": blob_name,
        "queries": queries,
        "frames": frames,
    }
    if trace.prng:
        manifest["prng"] = trace.prng
    if trace.ground_truth:
        manifest["ground_truth"] = trace.ground_truth
    manifest.update(trace.extra)

    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    (manifest_path.parent / blob_name).write_bytes(writer.getvalue())
    manifest_path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def _load_manifest(manifest_path: Path) -> tuple[dict, bytes]:
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise TraceFormatError(f"cannot read manifest {manifest_path}: {e}") from e
    if manifest.get("format_version") != FORMAT_VERSION:
        raise TraceFormatError(f"unsupported format_version {manifest.get('format_version')}")
    blob_path = manifest_path.parent / manifest["blob"]
    try:
        blob = blob_path.read_bytes()
    except OSError as e:
        raise TraceFormatError(f"cannot read blob {blob_path}: {e}") from e
    return manifest, blob


def load_trace(manifest_path: str | Path) -> TraceData:
    manifest_path = Path(manifest_path)
    manifest, blob = _load_manifest(manifest_path)
    try:
        queries = [
            QuerySpec(text=q["text"], embedding=read_tensor(blob, q["embedding_offset"]))
            for q in manifest["queries"]
        ]
        frames = []
        for rec in manifest["frames"]:
            proposals = []
            refiner = rec.get("refiner_scores")
            for j, off in enumerate(rec["proposal_offsets"]):
                header = read_tensor(blob, off)
                if header.shape != (5,):
                    raise TraceFormatError(f"bad proposal header at offset {off}")
                mask_off = off + 8 + 4 + 4 * 1 + 5 * 4
                mask = read_mask(blob, mask_off)
                emb_off = mask_off + 16 + mask.shape[0] * ((mask.shape[1] + 7) // 8)
                emb = read_tensor(blob, emb_off)
                proposals.append(
                    Proposal(
                        box=BBox(*(int(round(v)) for v in header[:4])),
                        mask=mask,
                        identity_embedding=emb,
                        detector_score=float(header[4]),
                        refiner_score=None if refiner is None else refiner[j],
                    )
                )
            frames.append(
                PerceptionFrame(
                    frame_index=int(rec["frame_index"]),
                    features=read_tensor(blob, rec["feature_offset"]),
                    proposals=tuple(proposals),
                    mean_brightness=float(rec["mean_brightness"]),
                )
            )
    except (KeyError, IndexError, struct.error) as e:
        raise TraceFormatError(f"malformed manifest/blob: {e}") from e
    return TraceData(
        frames=frames,
        queries=queries,
        ground_truth=manifest.get("ground_truth"),
        prng=manifest.get("prng"),
    )


def fingerprint_frames(frames, count: int) -> str:
    """Stable hash over the first `count` frames' feature bytes and extent."""
    h = hashlib.sha256()
    n = min(count, len(frames))
    for i in range(n):
        f = frames[i]
        h.update(struct.pack("<iii", *f.features.shape))
        h.update(np.ascontiguousarray(f.features, dtype="<f4").tobytes())
    return h.hexdigest()


def save_bank(bank, path: str | Path) -> None:
    from .anchors import AnchorBank  # noqa: F401  (type only; avoid cycle at import)

    path = Path(path)
    writer = BlobWriter()
    anchors = []
    for a in bank.anchors:
        anchors.append(
            {
                "mask_offset": writer.write_mask(a.mask),
                "prototype_offset": writer.write_tensor(a.prototype),
                "centroid": [a.centroid[0], a.centroid[1]],
            }
        )
    manifest = {
        "format_version": FORMAT_VERSION,
        "H": bank.height,
        "W": bank.width,
        "blob": path.stem + ".bin",
        "anchor_bank": {
            "K": len(bank.anchors),
            "t_star": bank.t_star,
            "T0": bank.t0,
            "trace_hash": bank.trace_hash,
            "static_threshold": bank.static_threshold,
            "truncated": bank.truncated,
            "anchors": anchors,
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    (path.parent / manifest["blob"]).write_bytes(writer.getvalue())
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def load_bank(path: str | Path):
    from .anchors import Anchor, AnchorBank

    path = Path(path)
    manifest, blob = _load_manifest(path)
    section = manifest.get("anchor_bank")
    if section is None:
        raise TraceFormatError("manifest has no anchor_bank section")
    anchors = []
    for rec in section["anchors"]:
        anchors.append(
            Anchor(
                mask=read_mask(blob, rec["mask_offset"]),
                prototype=read_tensor(blob, rec["prototype_offset"]),
                centroid=(float(rec["centroid"][0]), float(rec["centroid"][1])),
            )
        )
    return AnchorBank(
        anchors=tuple(anchors),
        height=int(manifest["H"]),
        width=int(manifest["W"]),
        trace_hash=section.get("trace_hash", ""),
        t0=int(section["T0"]),
        t_star=int(section["t_star"]),
        static_threshold=float(section.get("static_threshold", 0.0)),
        truncated=bool(section.get("truncated", False)),
    )


def save_heads(heads, path: str | Path) -> None:
    path = Path(path)
    writer = BlobWriter()
    manifest = {
        "format_version": FORMAT_VERSION,
        "blob": path.stem + ".bin",
        "heads": {
            "tau": heads.tau,
            "w_l_offset": writer.write_tensor(heads.w_l),
            "b_l_offset": writer.write_tensor(heads.b_l),
            "w_v_offset": writer.write_tensor(heads.w_v),
            "b_v_offset": writer.write_tensor(heads.b_v),
        },
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    (path.parent / manifest["blob"]).write_bytes(writer.getvalue())
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")


def load_heads(path: str | Path):
    from .anchors import AlignmentHeads

    path = Path(path)
    manifest, blob = _load_manifest(path)
    section = manifest.get("heads")
    if section is None:
        raise TraceFormatError("manifest has no heads section")
    return AlignmentHeads(
        w_l=read_tensor(blob, section["w_l_offset"]),
        b_l=read_tensor(blob, section["b_l_offset"]),
        w_v=read_tensor(blob, section["w_v_offset"]),
        b_v=read_tensor(blob, section["b_v_offset"]),
        tau=float(section["tau"]),
    )


def save_grid_sequence(grids: list[tuple[int, np.ndarray]], path: str | Path) -> None:
    """Persist (frame_index, grid) snapshots, e.g. per-frame prior dumps."""
    path = Path(path)
    writer = BlobWriter()
    frames = [
        {"frame_index": idx, "offset": writer.write_tensor(np.asarray(g, dtype=np.float32))}
        for idx, g in grids
    ]
    manifest = {
        "format_version": FORMAT_VERSION,
        "blob": path.stem + ".bin",
        "grids": frames,
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    (path.parent / manifest["blob"]).write_bytes(writer.getvalue())
    path.write_text(json.dumps(manifest, indent=1) + "\n", encoding="utf-8")
