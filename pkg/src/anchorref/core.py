"""Core domain types, vector ops, and trace validation.

Conventions used across the engine:
  * grids are row-major numpy arrays indexed [row, col], origin top-left;
  * boxes are half-open pixel rectangles: x spans columns [x0, x1),
    y spans rows [y0, y1);
  * scalar payloads are float32 at rest, reductions accumulate in float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

NORM_TOL = 1e-5
ZERO_NORM_EPS = 1e-12


class AnchorRefError(Exception):
    """Base class for engine errors."""


class ZeroVectorError(AnchorRefError):
    """An operation received an (effectively) zero embedding."""


class EmptySceneError(AnchorRefError):
    """No static region survived anchor distillation."""


class TraceFormatError(AnchorRefError):
    """Malformed trace/bank container."""


class ConfigError(AnchorRefError):
    """Invalid run configuration."""


def normalize(v: np.ndarray) -> np.ndarray:
    """L2-normalize, preserving direction. Raises ZeroVectorError on ~0 input."""
    v = np.asarray(v, dtype=np.float64)
    n = math.sqrt(float(np.dot(v, v)))
    if n < ZERO_NORM_EPS:
        raise ZeroVectorError("cannot normalize a zero vector")
    return (v / n).astype(np.float32)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, clamped to [-1, 1] against rounding."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    da = float(np.dot(a, a))
    db = float(np.dot(b, b))
    if da < ZERO_NORM_EPS**2 or db < ZERO_NORM_EPS**2:
        raise ZeroVectorError("cosine of a zero vector")
    return min(1.0, max(-1.0, float(np.dot(a, b)) / math.sqrt(da * db)))


def is_normalized(v: np.ndarray, tol: float = NORM_TOL) -> bool:
    n = math.sqrt(float(np.dot(np.asarray(v, dtype=np.float64), np.asarray(v, dtype=np.float64))))
    return abs(n - 1.0) <= tol


@dataclass(frozen=True)
class BBox:
    """Half-open pixel box: columns [x0, x1), rows [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def valid_for(self, height: int, width: int) -> bool:
        return 0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height

    @property
    def area(self) -> int:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    def as_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]


def mask_centroid(mask: np.ndarray) -> tuple[float, float]:
    """Arithmetic mean (row, col) of mask member pixels."""
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise ValueError("empty mask has no centroid")
    return float(rows.astype(np.float64).mean()), float(cols.astype(np.float64).mean())


@dataclass(frozen=True)
class Proposal:
    """One detector proposal: geometry plus its precomputed identity embedding."""

    box: BBox
    mask: np.ndarray  # bool (H, W)
    identity_embedding: np.ndarray  # float32, unit norm
    detector_score: float
    refiner_score: float | None = None


@dataclass(frozen=True)
class PerceptionFrame:
    frame_index: int
    features: np.ndarray  # float32 (H, W, d_v)
    proposals: tuple[Proposal, ...]
    mean_brightness: float


@dataclass(frozen=True)
class QuerySpec:
    text: str
    embedding: np.ndarray  # float32 (d_l,)


@dataclass(frozen=True)
class TrajectoryEntry:
    """Per-frame output: box is None while the target is not localized."""

    frame: int
    box: BBox | None
    score: float | None
    gate_score: float | None
    mode: str  # "tracking" | "searching"

    @property
    def status(self) -> str:
        return "box" if self.box is not None else "absent"


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def _check_proposal(report: ValidationReport, where: str, p: Proposal, h: int, w: int) -> None:
    if p.mask.shape != (h, w):
        report.add(f"{where}: mask extent {p.mask.shape} != ({h}, {w})")
        return
    if not p.mask.any():
        report.add(f"{where}: empty mask")
    if not p.box.valid_for(h, w):
        report.add(f"{where}: invalid box {p.box.as_list()} for extent {h}x{w}")
    if not np.isfinite(p.identity_embedding).all():
        report.add(f"{where}: non-finite identity embedding")
    elif not is_normalized(p.identity_embedding):
        report.add(f"{where}: identity embedding not unit-norm")
    if not (0.0 <= p.detector_score <= 1.0):
        report.add(f"{where}: detector score {p.detector_score} outside [0,1]")


def validate_trace(frames, query: QuerySpec | None = None) -> ValidationReport:
    """Check every frame against the fixed-view trace contract.

    Returns a report listing each violation with its frame index; the
    report is OK iff no violations were found. Accepts any sequence of
    PerceptionFrame (materialized or lazy).
    """
    report = ValidationReport()
    if len(frames) == 0:
        report.add("trace is empty")
        return report

    first = frames[0]
    h, w, dv = first.features.shape
    prev_index = None
    for i in range(len(frames)):
        frame = frames[i]
        where = f"frame {i}"
        fh, fw, fd = frame.features.shape
        if (fh, fw) != (h, w):
            report.add(f"extent mismatch at {where}: {fh}x{fw} != {h}x{w}")
            continue
        if fd != dv:
            report.add(f"feature depth mismatch at {where}: {fd} != {dv}")
            continue
        if frame.frame_index < 0:
            report.add(f"{where}: negative frame_index")
        if prev_index is not None and frame.frame_index <= prev_index:
            report.add(f"{where}: frame_index not strictly increasing")
        prev_index = frame.frame_index
        if not np.isfinite(frame.features).all():
            report.add(f"{where}: non-finite features")
        for j, p in enumerate(frame.proposals):
            _check_proposal(report, f"{where} proposal {j}", p, h, w)

    if query is not None and not np.isfinite(query.embedding).all():
        report.add("query embedding non-finite")
    return report
