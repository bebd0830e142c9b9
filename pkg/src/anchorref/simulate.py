"""Deterministic synthetic fixed-view scenes with exact ground truth.

World model:
  * a handful of rectangular static structures, each carrying a fixed
    feature signature plus a frozen spatial texture (so they are exactly
    static over time and bank distillation recovers them);
  * background pixels flicker over time, which keeps them out of the
    static set;
  * a target entity that enters at its home structure's centroid and
    orbits near it while visible; its script alternates visible segments
    and absences, and every absent-to-visible transition is a ground-truth
    re-entry event;
  * optional distractors that loiter on the home structure with tunable
    feature similarity to the target, and separately tunable identity
    similarity (appearance lookalikes are usually not identity
    lookalikes);
  * optional appearance ramp after a re-entry: the target's features blend
    up from background over a few frames while its geometry stays exact.

All signature vectors are mutually orthonormal, so query/target/distractor
cosines are exact by construction. Randomness comes from numpy PCG64
seeded via SeedSequence([seed, stream, ...]); per-frame noise uses its own
stream keyed by frame index, making generation order-independent and
bit-stable per seed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .container import TraceData
from .core import BBox, PerceptionFrame, Proposal, QuerySpec, normalize
from .metrics import ABSENT, VISIBLE, GroundTruth

PRNG_NOTE = "numpy PCG64 via SeedSequence([seed, stream, frame]); standard_normal draws"


@dataclass(frozen=True)
class StructureSpec:
    """Static rectangle [r0, r1) x [c0, c1)."""

    r0: int
    c0: int
    r1: int
    c1: int

    @property
    def centroid(self) -> tuple[float, float]:
        return ((self.r0 + self.r1 - 1) / 2.0, (self.c0 + self.c1 - 1) / 2.0)


@dataclass(frozen=True)
class VisibleSegment:
    start: int
    end: int  # half-open
    ramp: int = 0  # frames to blend appearance up from background after entry


@dataclass(frozen=True)
class DistractorSpec:
    windows: tuple[tuple[int, int], ...]
    appearance_similarity: float  # cosine of distractor vs target feature signature
    identity_similarity: float = 0.0  # cosine of distractor vs target identity signature
    offset: tuple[int, int] = (10, 0)  # loiter offset from home centroid (rows, cols)


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    seed: int
    height: int = 128
    width: int = 128
    d_v: int = 32
    d_l: int = 32
    num_frames: int = 600
    structures: tuple[StructureSpec, ...] = ()
    home: int = 0
    target_size: int = 9  # odd box side
    segments: tuple[VisibleSegment, ...] = ()
    distractors: tuple[DistractorSpec, ...] = ()
    noise: float = 0.0
    background_flicker: float = 0.3
    query_text: str = "the target near its usual spot"
    query_target_affinity: float = 0.85
    query_anchor_affinity: float = 0.45
    orbit_radius: float = 4.0
    entry_alpha: float = 0.5  # appearance blend at the first ramp frame

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioSpec":
        doc = dict(doc)
        doc["structures"] = tuple(StructureSpec(**s) for s in doc["structures"])
        doc["segments"] = tuple(VisibleSegment(**s) for s in doc["segments"])
        doc["distractors"] = tuple(
            DistractorSpec(
                windows=tuple(tuple(w) for w in d["windows"]),
                appearance_similarity=d["appearance_similarity"],
                identity_similarity=d.get("identity_similarity", 0.0),
                offset=tuple(d.get("offset", (10, 0))),
            )
            for d in doc["distractors"]
        )
        return cls(**doc)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ScenarioSpec":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _orthonormal_columns(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    if count > dim:
        raise ValueError(f"need {count} orthonormal signatures but dim is {dim}")
    m = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    q = q * np.sign(np.diag(r))  # deterministic sign convention
    return q[:, :count]


@dataclass
class _World:
    """Derived per-scenario state shared by all frames."""

    spec: ScenarioSpec
    struct_sigs: np.ndarray  # (n_struct, d_v)
    bg_sig: np.ndarray
    target_sig: np.ndarray
    distractor_sigs: np.ndarray  # (n_distr, d_v), exact cosine vs target
    target_id: np.ndarray
    distractor_ids: np.ndarray
    query_embedding: np.ndarray
    struct_fills: list[np.ndarray]  # frozen per-structure pixels: sig + noise*texture
    orbit_phase: list[float]  # per visible segment
    static_grid: np.ndarray  # bool map of structure pixels

    def home_centroid(self) -> tuple[float, float]:
        return self.spec.structures[self.spec.home].centroid


def _build_world(spec: ScenarioSpec) -> _World:
    rng = np.random.default_rng([spec.seed, 0])
    n_struct = len(spec.structures)
    n_distr = len(spec.distractors)
    sigs = _orthonormal_columns(rng, spec.d_v, n_struct + n_distr + 3)
    struct_sigs = sigs[:, :n_struct].T
    bg_sig = sigs[:, n_struct]
    target_sig = sigs[:, n_struct + 1]
    resid = sigs[:, n_struct + 2]
    distr_bases = sigs[:, n_struct + 3 :].T

    distractor_sigs = np.empty((n_distr, spec.d_v))
    for i, d in enumerate(spec.distractors):
        s = d.appearance_similarity
        distractor_sigs[i] = s * target_sig + math.sqrt(max(0.0, 1.0 - s * s)) * distr_bases[i]

    id_sigs = _orthonormal_columns(np.random.default_rng([spec.seed, 1]), spec.d_v, n_distr + 1)
    target_id = id_sigs[:, 0]
    distractor_ids = np.empty((n_distr, spec.d_v))
    for i, d in enumerate(spec.distractors):
        s = d.identity_similarity
        distractor_ids[i] = s * target_id + math.sqrt(max(0.0, 1.0 - s * s)) * id_sigs[:, i + 1]

    a_t = spec.query_target_affinity
    a_h = spec.query_anchor_affinity
    a_0 = math.sqrt(max(0.0, 1.0 - a_t * a_t - a_h * a_h))
    query = a_t * target_sig + a_h * struct_sigs[spec.home] + a_0 * resid

    tex_rng = np.random.default_rng([spec.seed, 2])
    struct_fills = []
    for s, sig in zip(spec.structures, struct_sigs):
        tex = tex_rng.standard_normal((s.r1 - s.r0, s.c1 - s.c0, spec.d_v))
        struct_fills.append((sig + spec.noise * tex).astype(np.float32))
    path_rng = np.random.default_rng([spec.seed, 3])
    orbit_phase = [float(path_rng.uniform(0.0, 2 * math.pi)) for _ in spec.segments]

    static = np.zeros((spec.height, spec.width), dtype=bool)
    for s in spec.structures:
        static[s.r0 : s.r1, s.c0 : s.c1] = True

    return _World(
        spec=spec,
        struct_sigs=struct_sigs,
        bg_sig=bg_sig,
        target_sig=target_sig,
        distractor_sigs=distractor_sigs,
        target_id=target_id,
        distractor_ids=distractor_ids,
        query_embedding=query,
        struct_fills=struct_fills,
        orbit_phase=orbit_phase,
        static_grid=static,
    )


def _segment_at(spec: ScenarioSpec, t: int) -> tuple[int, VisibleSegment] | None:
    for i, seg in enumerate(spec.segments):
        if seg.start <= t < seg.end:
            return i, seg
    return None


def _target_center(world: _World, seg_index: int, seg: VisibleSegment, t: int) -> tuple[int, int]:
    """Orbit outward from the home centroid after each entry."""
    spec = world.spec
    cr, cc = world.home_centroid()
    tau = t - seg.start
    radius = min(spec.orbit_radius, 0.35 * tau)
    theta = world.orbit_phase[seg_index] + 0.22 * tau
    return int(round(cr + radius * math.cos(theta))), int(round(cc + radius * math.sin(theta)))


def _entity_box(spec: ScenarioSpec, center: tuple[int, int]) -> BBox:
    half = spec.target_size // 2
    r, c = center
    r = min(max(r, half), spec.height - half - 1)
    c = min(max(c, half), spec.width - half - 1)
    return BBox(x0=c - half, y0=r - half, x1=c + half + 1, y1=r + half + 1)


def _box_mask(spec: ScenarioSpec, box: BBox) -> np.ndarray:
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    mask[box.y0 : box.y1, box.x0 : box.x1] = True
    return mask


def _alpha(seg: VisibleSegment, t: int, entry_alpha: float) -> float:
    if seg.ramp <= 0:
        return 1.0
    return min(1.0, entry_alpha + (1.0 - entry_alpha) * (t - seg.start) / seg.ramp)


def _render_frame(world: _World, t: int) -> PerceptionFrame:
    spec = world.spec
    rng = np.random.default_rng([spec.seed, 10, t])

    feats = np.empty((spec.height, spec.width, spec.d_v), dtype=np.float32)
    feats[:] = world.bg_sig.astype(np.float32)
    if spec.background_flicker > 0.0:
        # structure pixels are overwritten below, so the flicker only
        # survives on the background
        feats += np.float32(spec.background_flicker) * rng.standard_normal(
            feats.shape, dtype=np.float32
        )
    for s, fill in zip(spec.structures, world.struct_fills):
        feats[s.r0 : s.r1, s.c0 : s.c1] = fill

    def entity_patch(box: BBox, fill: np.ndarray) -> np.ndarray:
        patch = np.broadcast_to(
            fill.astype(np.float32), (box.y1 - box.y0, box.x1 - box.x0, spec.d_v)
        )
        if spec.noise > 0.0:
            patch = patch + np.float32(spec.noise) * rng.standard_normal(
                patch.shape, dtype=np.float32
            )
        return patch

    def identity(base: np.ndarray) -> np.ndarray:
        if spec.noise > 0.0:
            base = base + 0.5 * spec.noise * rng.standard_normal(spec.d_v)
        return normalize(base)

    proposals = []

    seg_hit = _segment_at(spec, t)
    if seg_hit is not None:
        i, seg = seg_hit
        box = _entity_box(spec, _target_center(world, i, seg, t))
        alpha = _alpha(seg, t, spec.entry_alpha)
        feats[box.y0 : box.y1, box.x0 : box.x1] = entity_patch(
            box, alpha * world.target_sig + (1.0 - alpha) * world.bg_sig
        )
        score = float(np.clip(0.88 + 0.05 * rng.standard_normal(), 0.0, 1.0))
        proposals.append(
            Proposal(box=box, mask=_box_mask(spec, box),
                     identity_embedding=identity(world.target_id), detector_score=score)
        )

    cr, cc = world.home_centroid()
    for j, d in enumerate(spec.distractors):
        if not any(a <= t < b for a, b in d.windows):
            continue
        box = _entity_box(spec, (int(round(cr + d.offset[0])), int(round(cc + d.offset[1]))))
        feats[box.y0 : box.y1, box.x0 : box.x1] = entity_patch(box, world.distractor_sigs[j])
        score = float(np.clip(0.85 + 0.05 * rng.standard_normal(), 0.0, 1.0))
        proposals.append(
            Proposal(box=box, mask=_box_mask(spec, box),
                     identity_embedding=identity(world.distractor_ids[j]), detector_score=score)
        )

    brightness = 0.5 + 0.08 * math.sin(2.0 * math.pi * (t + spec.seed % 17) / 53.0)
    return PerceptionFrame(
        frame_index=t,
        features=feats,
        proposals=tuple(proposals),
        mean_brightness=brightness,
    )


def _ground_truth(world: _World) -> GroundTruth:
    spec = world.spec
    visibility = [ABSENT] * spec.num_frames
    boxes: dict[int, BBox] = {}
    events = []
    for i, seg in enumerate(spec.segments):
        events.append(seg.start)
        for t in range(seg.start, seg.end):
            visibility[t] = VISIBLE
            boxes[t] = _entity_box(spec, _target_center(world, i, seg, t))

    cr, cc = world.home_centroid()
    distractor_boxes = []
    for d in spec.distractors:
        per_frame = {}
        box = _entity_box(spec, (int(round(cr + d.offset[0])), int(round(cc + d.offset[1]))))
        for a, b in d.windows:
            for t in range(a, min(b, spec.num_frames)):
                per_frame[t] = box
        distractor_boxes.append(per_frame)

    return GroundTruth(
        visibility=visibility,
        boxes=boxes,
        reentry_events=sorted(events),
        distractor_boxes=distractor_boxes,
    )


def generate(spec: ScenarioSpec) -> tuple[TraceData, GroundTruth]:
    """Materialize the whole trace plus exact ground truth."""
    _validate_spec(spec)
    world = _build_world(spec)
    frames = [_render_frame(world, t) for t in range(spec.num_frames)]
    query = QuerySpec(text=spec.query_text, embedding=normalize(world.query_embedding))
    trace = TraceData(frames=frames, queries=[query], prng=PRNG_NOTE)
    return trace, _ground_truth(world)


def _validate_spec(spec: ScenarioSpec) -> None:
    if not spec.structures:
        raise ValueError("scenario needs at least one structure")
    if not (0 <= spec.home < len(spec.structures)):
        raise ValueError("home structure index out of range")
    if spec.d_l != spec.d_v:
        raise ValueError("synthetic scenes co-embed text and vision; d_l must equal d_v")
    if spec.target_size % 2 != 1:
        raise ValueError("target_size must be odd")
    for s in spec.structures:
        if not (0 <= s.r0 < s.r1 <= spec.height and 0 <= s.c0 < s.c1 <= spec.width):
            raise ValueError(f"structure {s} outside the {spec.height}x{spec.width} extent")
    last_end = 0
    for seg in spec.segments:
        if seg.start < last_end:
            raise ValueError("visible segments must be ordered and disjoint")
        if seg.end > spec.num_frames:
            raise ValueError("segment extends past the trace")
        last_end = seg.end
    for d in spec.distractors:
        if not (0.0 <= d.appearance_similarity <= 1.0):
            raise ValueError("appearance similarity must be in [0,1]")


# --- suite construction ----------------------------------------------------

WARMUP = 66  # frames before anything moves; covers the default bank window


def _structures(scale: int) -> tuple[StructureSpec, ...]:
    return (
        StructureSpec(3 * scale, 3 * scale, 33 * scale, 33 * scale),
        StructureSpec(6 * scale, 42 * scale, 17 * scale, 62 * scale),
        StructureSpec(40 * scale, 6 * scale, 55 * scale, 18 * scale),
        StructureSpec(46 * scale, 38 * scale, 56 * scale, 48 * scale),
    )


def _base(name: str, seed: int, num_frames: int, scale: int = 1, d: int = 16) -> dict:
    return {
        "name": name,
        "seed": seed,
        "height": 64 * scale,
        "width": 64 * scale,
        "d_v": d,
        "d_l": d,
        "num_frames": num_frames,
        "structures": _structures(scale),
        "home": 0,
        "target_size": 9,
    }


def _clean_spec(seed: int) -> ScenarioSpec:
    rng = np.random.default_rng([seed, 100])
    gap1 = int(rng.integers(10, 30))
    gap2 = int(rng.integers(10, 30))
    segments = (
        VisibleSegment(WARMUP, WARMUP + 45),
        VisibleSegment(WARMUP + 45 + gap1, WARMUP + 90 + gap1),
        VisibleSegment(WARMUP + 90 + gap1 + gap2, WARMUP + 130 + gap1 + gap2),
    )
    return ScenarioSpec(
        **_base("clean", seed, segments[-1].end + 10),
        segments=segments,
        noise=0.0,
    )


def _ablation_spec(seed: int) -> ScenarioSpec:
    rng = np.random.default_rng([seed, 101])
    absences = [int(rng.integers(4, 13)) for _ in range(2)]
    ramps = [int(rng.integers(12, 25)) for _ in range(2)]
    sim = float(rng.uniform(0.90, 0.95))
    id_sim = float(rng.uniform(0.0, 0.08))
    offsets = [(10, 0), (0, 10), (-10, 0), (0, -10), (7, 7), (-7, 7)]
    offset = offsets[int(rng.integers(0, len(offsets)))]

    t1 = WARMUP
    t1e = t1 + 70
    t2 = t1e + absences[0]
    t2e = t2 + 70
    t3 = t2e + absences[1]
    t3e = t3 + 60
    segments = (
        VisibleSegment(t1, t1e, ramp=0),
        VisibleSegment(t2, t2e, ramp=ramps[0]),
        VisibleSegment(t3, t3e, ramp=ramps[1]),
    )
    windows = (
        (t1e + 1, t2 + ramps[0]),
        (t2e + 1, t3 + ramps[1]),
    )
    return ScenarioSpec(
        **_base("ablation", seed, t3e + 10),
        segments=segments,
        distractors=(
            DistractorSpec(
                windows=windows,
                appearance_similarity=sim,
                identity_similarity=id_sim,
                offset=offset,
            ),
        ),
        noise=0.05,
    )


def _gating_spec(seed: int, num_frames: int = 600) -> ScenarioSpec:
    rng = np.random.default_rng([seed, 102])
    sim = float(rng.uniform(0.90, 0.98))
    absences = [int(rng.integers(60, 91)) for _ in range(3)]
    segments = []
    windows = []
    t = WARMUP
    for gap in absences:
        end = t + 55
        segments.append(VisibleSegment(t, end))
        windows.append((end + 1, end + gap))
        t = end + gap
    segments.append(VisibleSegment(t, num_frames))  # visible through the end: no idle tail
    return ScenarioSpec(
        **_base("gating", seed, num_frames),
        segments=tuple(segments),
        distractors=(
            DistractorSpec(
                windows=tuple(windows),
                appearance_similarity=sim,
                identity_similarity=0.0,
                offset=(10, 0),
            ),
        ),
        noise=0.03,
    )


def _latency_spec(seed: int) -> ScenarioSpec:
    rng = np.random.default_rng([seed, 103])
    stratum = seed % 3
    absence = {0: int(rng.integers(45, 56)), 1: int(rng.integers(70, 150)), 2: int(rng.integers(190, 240))}[stratum]
    ramp = int(np.clip(round(absence * 0.35), 4, 40))
    # a short warmup keeps the initial absence out of the medium stratum
    warmup = 44 if stratum == 0 else WARMUP
    t1, t1e = warmup, warmup + 90
    t2 = t1e + absence
    t2e = t2 + 90
    return ScenarioSpec(
        **_base("latency", seed, t2e + 10),
        segments=(VisibleSegment(t1, t1e), VisibleSegment(t2, t2e, ramp=ramp)),
        distractors=(
            DistractorSpec(
                windows=((t1e + 1, t2 + ramp),),
                appearance_similarity=0.9,
                identity_similarity=0.0,
                offset=(0, 10),
            ),
        ),
        noise=0.04,
    )


_FAMILIES = {
    "clean": _clean_spec,
    "ablation": _ablation_spec,
    "gating": _gating_spec,
    "latency": _latency_spec,
}


def make_suite(name: str, seeds: list[int]) -> list[ScenarioSpec]:
    if name not in _FAMILIES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(_FAMILIES)}")
    return [_FAMILIES[name](seed) for seed in seeds]


def default_scenario(seed: int = 0) -> ScenarioSpec:
    """Full-size single scenario (128x128, d=32, 600 frames)."""
    rng = np.random.default_rng([seed, 104])
    gap1 = int(rng.integers(20, 60))
    gap2 = int(rng.integers(20, 60))
    t1, t1e = WARMUP, WARMUP + 160
    t2 = t1e + gap1
    t2e = t2 + 160
    t3 = t2e + gap2
    base = _base("default", seed, 600, scale=2, d=32)
    return ScenarioSpec(
        **base,
        segments=(
            VisibleSegment(t1, t1e),
            VisibleSegment(t2, t2e, ramp=8),
            VisibleSegment(t3, min(t3 + 120, 598), ramp=8),
        ),
        noise=0.02,
    )


def recommended_overrides(spec: ScenarioSpec) -> dict[str, str]:
    """Engine config adjustments for a scenario family.

    Suites at 64x64 scale use a tighter prior kernel so redirected mass
    stays localized over the short absences they script; the bank window
    shrinks when a scenario's warmup is shorter than the default window.
    """
    overrides = {"prior.sigma": "1.0"}
    if spec.height >= 128:
        overrides["prior.sigma"] = "2.0"
    if spec.segments:
        first = spec.segments[0].start
        t0 = min(60, first - 2)
        if t0 < 60:
            overrides["anchor.t0"] = str(max(30, t0))
    return overrides
