"""Evaluation suite: localization, identity consistency, and re-capture.

Ground truth carries a per-frame visibility label (visible / occluded /
absent), boxes for visible frames, and the explicit frame index of every
absent-to-visible transition. Predictions are per-frame optional boxes
with scores.

Scoring conventions:
  * visible frames with no prediction count as misses (IoU 0);
  * predictions on absent frames are false positives;
  * predictions on occluded frames are ignored entirely (neither rewarded
    nor punished);
  * a re-entry event's window runs to the next event or the sequence end.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import BBox, TrajectoryEntry

VISIBLE = "visible"
OCCLUDED = "occluded"
ABSENT = "absent"

COCO_TAUS = [0.5 + 0.05 * i for i in range(10)]
PRECISION_TAUS = [0.5, 0.6, 0.7, 0.8, 0.9]

ABSENCE_SHORT_MAX = 60  # short < 60 <= medium <= 180 < long
ABSENCE_MEDIUM_MAX = 180


@dataclass
class GroundTruth:
    visibility: list[str]  # one label per frame
    boxes: dict[int, BBox]  # visible frames only
    reentry_events: list[int]  # frame of each absent -> visible transition
    distractor_boxes: list[dict[int, BBox]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.visibility)

    def longest_absence(self) -> int:
        best = run = 0
        for label in self.visibility:
            run = run + 1 if label == ABSENT else 0
            best = max(best, run)
        return best

    def absence_stratum(self) -> str:
        n = self.longest_absence()
        if n < ABSENCE_SHORT_MAX:
            return "short"
        if n <= ABSENCE_MEDIUM_MAX:
            return "medium"
        return "long"

    def reentry_stratum(self) -> str:
        return "single" if len(self.reentry_events) <= 1 else "multiple"

    def to_json(self) -> dict:
        return {
            "frames": [
                {
                    "frame": i,
                    "visibility": self.visibility[i],
                    "box": self.boxes[i].as_list() if i in self.boxes else None,
                }
                for i in range(len(self.visibility))
            ],
            "reentry_events": [
                {"index": k, "frame": t} for k, t in enumerate(self.reentry_events)
            ],
            "distractors": [
                {"boxes": {str(f): b.as_list() for f, b in boxes.items()}}
                for boxes in self.distractor_boxes
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "GroundTruth":
        frames = doc["frames"]
        visibility = [f["visibility"] for f in frames]
        boxes = {
            int(f["frame"]): BBox(*f["box"]) for f in frames if f.get("box") is not None
        }
        events = [int(e["frame"]) for e in doc.get("reentry_events", [])]
        distractors = [
            {int(f): BBox(*b) for f, b in d["boxes"].items()}
            for d in doc.get("distractors", [])
        ]
        return cls(
            visibility=visibility,
            boxes=boxes,
            reentry_events=sorted(events),
            distractor_boxes=distractors,
        )

    @classmethod
    def load(cls, path: str | Path) -> "GroundTruth":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class EvalReport:
    miou: float
    map: float
    precision_at: dict[float, float]
    idf1: float
    rcr: float | None
    rcl: float | None
    redetected_fraction: float | None
    num_reentries: int
    num_frames: int
    rcr_sweep: dict[float, float] | None = None

    def to_json(self) -> dict:
        return {
            "mIoU": self.miou,
            "mAP": self.map,
            "precision_at": {f"{t:.2f}": v for t, v in self.precision_at.items()},
            "IDF1": self.idf1,
            "RCR": self.rcr,
            "RCL": self.rcl,
            "redetected_fraction": self.redetected_fraction,
            "num_reentries": self.num_reentries,
            "num_frames": self.num_frames,
            **({"rcr_sweep": {f"{t:.2f}": v for t, v in self.rcr_sweep.items()}}
               if self.rcr_sweep else {}),
        }


def iou(a: BBox, b: BBox) -> float:
    ix0, iy0 = max(a.x0, b.x0), max(a.y0, b.y0)
    ix1, iy1 = min(a.x1, b.x1), min(a.y1, b.y1)
    if ix0 >= ix1 or iy0 >= iy1:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    return inter / (a.area + b.area - inter)


def _pred_boxes(predictions: list[TrajectoryEntry]) -> list[BBox | None]:
    return [e.box for e in predictions]


def _check_lengths(predictions, gt: GroundTruth) -> None:
    if len(predictions) != len(gt):
        raise ValueError(
            f"prediction length {len(predictions)} != ground-truth length {len(gt)}"
        )


def miou(predictions: list[TrajectoryEntry], gt: GroundTruth) -> float:
    """Mean IoU over visible ground-truth frames; misses count 0."""
    _check_lengths(predictions, gt)
    boxes = _pred_boxes(predictions)
    total = 0.0
    count = 0
    for t, label in enumerate(gt.visibility):
        if label != VISIBLE:
            continue
        count += 1
        if boxes[t] is not None:
            total += iou(boxes[t], gt.boxes[t])
    if count == 0:
        raise ValueError("ground truth has no visible frames")
    return total / count


def precision_at(predictions: list[TrajectoryEntry], gt: GroundTruth, tau: float) -> float:
    """Fraction of visible frames localized with IoU >= tau."""
    _check_lengths(predictions, gt)
    boxes = _pred_boxes(predictions)
    hits = 0
    count = 0
    for t, label in enumerate(gt.visibility):
        if label != VISIBLE:
            continue
        count += 1
        if boxes[t] is not None and iou(boxes[t], gt.boxes[t]) >= tau:
            hits += 1
    return hits / count if count else 0.0


def average_precision(predictions: list[TrajectoryEntry], gt: GroundTruth, tau: float) -> float:
    """101-point interpolated AP at one IoU threshold (single instance per frame)."""
    _check_lengths(predictions, gt)
    n_visible = sum(1 for v in gt.visibility if v == VISIBLE)
    dets = []
    for e in predictions:
        if e.box is None or gt.visibility[e.frame] == OCCLUDED:
            continue
        is_tp = (
            gt.visibility[e.frame] == VISIBLE and iou(e.box, gt.boxes[e.frame]) >= tau
        )
        dets.append((-(e.score if e.score is not None else 0.0), e.frame, is_tp))
    dets.sort()
    if not dets or n_visible == 0:
        return 0.0

    tp = np.cumsum([d[2] for d in dets])
    ranks = np.arange(1, len(dets) + 1)
    precision = tp / ranks
    recall = tp / n_visible
    ap = 0.0
    for r in np.linspace(0.0, 1.0, 101):
        mask = recall >= r - 1e-12
        if mask.any():
            ap += float(precision[mask].max())
    return ap / 101.0


def map_coco(predictions: list[TrajectoryEntry], gt: GroundTruth) -> float:
    return float(np.mean([average_precision(predictions, gt, t) for t in COCO_TAUS]))


def idf1(predictions: list[TrajectoryEntry], gt: GroundTruth, tau: float = 0.5) -> float:
    """Identity F1 with per-frame IoU >= tau matching (single identity, so the
    track-to-track assignment is trivial)."""
    _check_lengths(predictions, gt)
    boxes = _pred_boxes(predictions)
    idtp = idfp = idfn = 0
    for t, label in enumerate(gt.visibility):
        if label == OCCLUDED:
            continue
        has_pred = boxes[t] is not None
        if label == VISIBLE:
            if has_pred and iou(boxes[t], gt.boxes[t]) >= tau:
                idtp += 1
            else:
                idfn += 1
                if has_pred:
                    idfp += 1
        elif has_pred:
            idfp += 1
    denom = 2 * idtp + idfp + idfn
    return 2 * idtp / denom if denom else 0.0


def _event_windows(gt: GroundTruth) -> list[tuple[int, int]]:
    events = sorted(gt.reentry_events)
    ends = [*events[1:], len(gt)]
    return list(zip(events, ends))


def rcr(predictions: list[TrajectoryEntry], gt: GroundTruth, tau: float = 0.5) -> float | None:
    """Fraction of re-entry events whose first emitted box meets the IoU bar.

    None when the sequence has no re-entry events.
    """
    _check_lengths(predictions, gt)
    windows = _event_windows(gt)
    if not windows:
        return None
    boxes = _pred_boxes(predictions)
    hits = 0
    for start, end in windows:
        for t in range(start, end):
            if boxes[t] is None:
                continue
            if gt.visibility[t] == VISIBLE and iou(boxes[t], gt.boxes[t]) >= tau:
                hits += 1
            break
    return hits / len(windows)


def rcl(
    predictions: list[TrajectoryEntry], gt: GroundTruth, tau: float = 0.5
) -> tuple[float | None, float | None]:
    """(mean re-capture latency in frames, fraction of events re-detected).

    Latency counts frames from the re-entry to the first prediction with
    IoU >= tau against the ground truth of that frame. Events never
    re-detected inside their window contribute the full window length.
    Returns (None, None) when there are no events.
    """
    _check_lengths(predictions, gt)
    windows = _event_windows(gt)
    if not windows:
        return None, None
    boxes = _pred_boxes(predictions)
    latencies = []
    detected = 0
    for start, end in windows:
        latency = end - start  # cap: never re-detected in this window
        for t in range(start, end):
            if (
                boxes[t] is not None
                and gt.visibility[t] == VISIBLE
                and iou(boxes[t], gt.boxes[t]) >= tau
            ):
                latency = t - start
                detected += 1
                break
        latencies.append(latency)
    return float(np.mean(latencies)), detected / len(windows)


def evaluate(
    predictions: list[TrajectoryEntry],
    gt: GroundTruth,
    tau: float = 0.5,
    rcr_sweep: bool = False,
) -> EvalReport:
    sweep = None
    if rcr_sweep:
        sweep = {t: rcr(predictions, gt, t) for t in COCO_TAUS}
    latency, redetected = rcl(predictions, gt, tau)
    return EvalReport(
        miou=miou(predictions, gt),
        map=map_coco(predictions, gt),
        precision_at={t: precision_at(predictions, gt, t) for t in PRECISION_TAUS},
        idf1=idf1(predictions, gt),
        rcr=rcr(predictions, gt, tau),
        rcl=latency,
        redetected_fraction=redetected,
        num_reentries=len(gt.reentry_events),
        num_frames=len(gt),
        rcr_sweep=sweep,
    )


def _pool(pairs: list[tuple[list[TrajectoryEntry], GroundTruth]], tau: float) -> EvalReport:
    """Pool frames and events across sequences into one report."""
    mious, weights = [], []
    precisions: dict[float, list[float]] = {t: [] for t in PRECISION_TAUS}
    maps, idf1s, frame_weights = [], [], []
    latencies: list[float] = []
    hits = events = detected = 0
    for preds, gt in pairs:
        n_vis = sum(1 for v in gt.visibility if v == VISIBLE)
        if n_vis:
            mious.append(miou(preds, gt))
            weights.append(n_vis)
            for t in PRECISION_TAUS:
                precisions[t].append(precision_at(preds, gt, t))
        maps.append(map_coco(preds, gt))
        idf1s.append(idf1(preds, gt))
        frame_weights.append(len(gt))
        windows = _event_windows(gt)
        if windows:
            boxes = _pred_boxes(preds)
            for start, end in windows:
                events += 1
                latency = end - start
                for f in range(start, end):
                    if boxes[f] is None:
                        continue
                    ok = gt.visibility[f] == VISIBLE and iou(boxes[f], gt.boxes[f]) >= tau
                    if ok:
                        hits += 1
                    break
                for f in range(start, end):
                    if (
                        boxes[f] is not None
                        and gt.visibility[f] == VISIBLE
                        and iou(boxes[f], gt.boxes[f]) >= tau
                    ):
                        latency = f - start
                        detected += 1
                        break
                latencies.append(latency)

    def wmean(values, w):
        return float(np.average(values, weights=w)) if values else 0.0

    return EvalReport(
        miou=wmean(mious, weights),
        map=float(np.mean(maps)) if maps else 0.0,
        precision_at={t: wmean(precisions[t], weights) for t in PRECISION_TAUS},
        idf1=float(np.mean(idf1s)) if idf1s else 0.0,
        rcr=hits / events if events else None,
        rcl=float(np.mean(latencies)) if latencies else None,
        redetected_fraction=detected / events if events else None,
        num_reentries=events,
        num_frames=int(np.sum(frame_weights)),
    )


def stratify(
    pairs: list[tuple[list[TrajectoryEntry], GroundTruth]], tau: float = 0.5
) -> dict[str, EvalReport]:
    """Overall report plus per-stratum reports along the absence-duration and
    re-entry-count axes."""
    out = {"all": _pool(pairs, tau)}
    groups: dict[str, list] = {}
    for preds, gt in pairs:
        groups.setdefault(f"absence={gt.absence_stratum()}", []).append((preds, gt))
        groups.setdefault(f"reentries={gt.reentry_stratum()}", []).append((preds, gt))
    for key in sorted(groups):
        out[key] = _pool(groups[key], tau)
    return out
