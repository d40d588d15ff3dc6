"""Evaluation harness: rotated-box IoU, average precision, segmentation IoU,
and a wall-clock latency benchmark.

Detection quality follows the BEV protocol: a detection is a true positive
when its rotated-box IoU with an unmatched ground truth exceeds the
threshold, matching greedily in descending score, and AP integrates the
precision-recall curve over 40 recall positions {1/40, ..., 1}.
"""

from __future__ import annotations

import math
import os
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateBoxError, ShapeMismatchError


@dataclass(frozen=True)
class RotatedBox:
    """BEV box: center (m), width/length (m), yaw in degrees CCW from +x.

    Length runs along the heading axis, width across it.
    """

    cx: float
    cy: float
    width: float
    length: float
    yaw_deg: float = 0.0

    def __post_init__(self):
        if self.width <= 0.0 or self.length <= 0.0:
            raise DegenerateBoxError(
                f"width/length must be positive, got ({self.width}, {self.length})"
            )

    def corners(self) -> np.ndarray:
        """Corner coordinates (4, 2) in counter-clockwise order."""
        hl, hw = self.length / 2.0, self.width / 2.0
        local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
        a = math.radians(self.yaw_deg)
        rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        return local @ rot.T + np.array([self.cx, self.cy])

    @property
    def area(self) -> float:
        return self.width * self.length


def _polygon_area(pts) -> float:
    """Shoelace area of a simple polygon given as a vertex list."""
    n = len(pts)
    if n < 3:
        return 0.0
    acc = 0.0
    for i in range(n):
        x0, y0 = pts[i]
        x1, y1 = pts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return abs(acc) / 2.0


def _clip_convex(subject, a, b):
    """Sutherland-Hodgman step: keep the part of ``subject`` left of edge a->b."""
    ax, ay = a
    bx, by = b
    ex, ey = bx - ax, by - ay

    def side(p):
        return ex * (p[1] - ay) - ey * (p[0] - ax)

    out = []
    n = len(subject)
    for i in range(n):
        cur = subject[i]
        prev = subject[i - 1]
        cur_s = side(cur)
        prev_s = side(prev)
        if cur_s >= 0.0:
            if prev_s < 0.0:
                t = prev_s / (prev_s - cur_s)
                out.append((prev[0] + t * (cur[0] - prev[0]),
                            prev[1] + t * (cur[1] - prev[1])))
            out.append((cur[0], cur[1]))
        elif prev_s >= 0.0:
            t = prev_s / (prev_s - cur_s)
            out.append((prev[0] + t * (cur[0] - prev[0]),
                        prev[1] + t * (cur[1] - prev[1])))
    return out


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection-over-union of two rotated boxes via convex polygon clipping."""
    subject = [tuple(p) for p in a.corners()]
    clip = b.corners()
    for i in range(4):
        subject = _clip_convex(subject, clip[i], clip[(i + 1) % 4])
        if not subject:
            return 0.0
    inter = _polygon_area(subject)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


@dataclass(frozen=True)
class ScoredBox:
    """A detection for evaluation."""

    frame_id: int
    box: RotatedBox
    score: float


@dataclass(frozen=True)
class GroundTruthBox:
    """An annotated box; difficulty is carried through, never recomputed."""

    frame_id: int
    box: RotatedBox
    difficulty: int = 0


def average_precision(detections, ground_truths, iou_thresh: float = 0.5,
                      n_recall_points: int = 40) -> float:
    """AP with greedy score-descending matching and N-point interpolation.

    A detection is a true positive when its IoU with some still-unmatched
    ground truth in its frame strictly exceeds ``iou_thresh``; each ground
    truth matches at most once. Score ties break by frame id then input
    order. AP is invariant under strictly monotone transforms of the scores.
    """
    dets = list(detections)
    gts = list(ground_truths)
    n_gt = len(gts)
    if n_gt == 0 or not dets:
        return 0.0

    by_frame: dict[int, list[int]] = {}
    for gi, gt in enumerate(gts):
        by_frame.setdefault(gt.frame_id, []).append(gi)
    matched = [False] * n_gt

    order = sorted(range(len(dets)),
                   key=lambda i: (-dets[i].score, dets[i].frame_id, i))
    tp = np.zeros(len(dets))
    for rank, di in enumerate(order):
        det = dets[di]
        best_iou, best_gi = 0.0, -1
        for gi in by_frame.get(det.frame_id, ()):
            if matched[gi]:
                continue
            iou = rotated_iou(det.box, gts[gi].box)
            if iou > best_iou:
                best_iou, best_gi = iou, gi
        if best_gi >= 0 and best_iou > iou_thresh:
            matched[best_gi] = True
            tp[rank] = 1.0

    tp_cum = np.cumsum(tp)
    recalls = tp_cum / n_gt
    precisions = tp_cum / np.arange(1, len(dets) + 1)
    ap = 0.0
    for i in range(1, n_recall_points + 1):
        r = i / n_recall_points
        attained = precisions[recalls >= r]
        ap += float(attained.max()) if attained.size else 0.0
    return ap / n_recall_points


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    @property
    def iou(self):
        denom = self.tp + self.fp + self.fn
        return None if denom == 0 else self.tp / denom


def confusion_counts(pred: np.ndarray, gt: np.ndarray, classes) -> dict:
    """Per-class TP/FP/FN over cells (or points)."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeMismatchError(f"pred {pred.shape} vs gt {gt.shape}")
    out = {}
    for c in classes:
        p = pred == c
        g = gt == c
        out[c] = ConfusionCounts(
            tp=int(np.count_nonzero(p & g)),
            fp=int(np.count_nonzero(p & ~g)),
            fn=int(np.count_nonzero(~p & g)),
        )
    return out


def segmentation_iou(pred: np.ndarray, gt: np.ndarray, classes) -> dict:
    """Per-class intersection over union TP / (TP + FP + FN).

    Classes absent from both rasters map to None (undefined) and are
    excluded from mean_iou.
    """
    return {c: counts.iou for c, counts in confusion_counts(pred, gt, classes).items()}


def mean_iou(per_class: dict):
    vals = [v for v in per_class.values() if v is not None]
    return None if not vals else float(np.mean(vals))


# --- latency benchmarking ----------------------------------------------------


@dataclass(frozen=True)
class LatencyReport:
    stage: str
    repeats: int
    warmup: int
    mean_ms: float
    p50_ms: float
    p99_ms: float
    samples_ms: tuple = field(repr=False, default=())

    def to_dict(self, include_samples: bool = False) -> dict:
        d = {"stage": self.stage, "repeats": self.repeats, "warmup": self.warmup,
             "mean_ms": self.mean_ms, "p50_ms": self.p50_ms, "p99_ms": self.p99_ms}
        if include_samples:
            d["samples_ms"] = list(self.samples_ms)
        return d


def latency_bench(stage: str, fn, repeats: int = 100, warmup: int = 10) -> LatencyReport:
    """Wall-clock stats for a callable after discarding warmup runs."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    for _ in range(warmup):
        fn()
    samples = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    ms = samples * 1e3
    return LatencyReport(
        stage=stage, repeats=repeats, warmup=warmup,
        mean_ms=float(ms.mean()),
        p50_ms=float(np.percentile(ms, 50)),
        p99_ms=float(np.percentile(ms, 99)),
        samples_ms=tuple(float(v) for v in ms),
    )


def environment_fingerprint() -> dict:
    """Machine/runtime identification attached to metric and bench reports."""
    return {
        "platform": platform.platform(),
        "machine": platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_count": os.cpu_count(),
    }
