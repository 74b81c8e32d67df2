"""mAP at temporal tolerance and the pixel-proportional compute model."""

from __future__ import annotations

import csv
import io as _io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .core import EventSet, RoispotError, ValidationError, round_half_up


class VideoMismatchError(RoispotError):
    """Detections refer to a video that has no ground truth."""


@dataclass(frozen=True)
class EvalConfig:
    tolerances: tuple = (0, 1, 2)
    unit: str = "frames"
    fps: float | None = None

    def __post_init__(self):
        tol = tuple(self.tolerances)
        if not tol:
            raise ValidationError("at least one tolerance is required")
        if any(t < 0 for t in tol) or list(tol) != sorted(tol):
            raise ValidationError(f"tolerances must be non-negative and ascending, got {tol}")
        if self.unit not in ("frames", "seconds"):
            raise ValidationError(f"unit must be 'frames' or 'seconds', got {self.unit!r}")
        if self.unit == "frames" and any(int(t) != t for t in tol):
            raise ValidationError("frame tolerances must be integers")
        if self.unit == "seconds" and not (self.fps and self.fps > 0):
            raise ValidationError("second tolerances need fps > 0")
        object.__setattr__(self, "tolerances", tol)

    def frame_tolerances(self) -> list[int]:
        if self.unit == "frames":
            return [int(t) for t in self.tolerances]
        return [round_half_up(t * self.fps) for t in self.tolerances]


@dataclass
class ApReport:
    delta: float
    delta_frames: int
    per_class: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)
    mAP: float = 0.0

    def to_json(self, classes: Sequence[str] | None = None) -> dict:
        def name(c):
            return classes[c - 1] if classes else str(c)

        return {
            "delta": self.delta,
            "delta_frames": self.delta_frames,
            "per_class": {name(c): ap for c, ap in sorted(self.per_class.items())},
            "counts": {
                name(c): {"tp": tp, "fp": fp, "gt": gt}
                for c, (tp, fp, gt) in sorted(self.counts.items())
            },
            "mAP": self.mAP,
        }


def _score(ev) -> float:
    # unscored events (e.g. ground truth used as detections) rank as certain
    return 1.0 if ev.score is None else ev.score


def _score_order(dets) -> list[int]:
    return sorted(range(len(dets)), key=lambda i: (-_score(dets[i]), dets[i].frame, i))


def match_detections(dets: Sequence, gt: Sequence, delta: int) -> np.ndarray:
    """Greedy matching of one video's detections to ground truth.

    Detections are visited by descending score (ties: earlier frame); each
    takes the nearest unmatched ground-truth event of its class within
    ``delta`` frames (ties: earlier event). Returns TP flags aligned with
    the input order of ``dets``.
    """
    flags = np.zeros(len(dets), dtype=bool)
    taken = [False] * len(gt)
    for i in _score_order(dets):
        d = dets[i]
        best = None
        for j, g in enumerate(gt):
            if taken[j] or g.label != d.label:
                continue
            dist = abs(g.frame - d.frame)
            if dist <= delta and (best is None or (dist, g.frame) < best[0]):
                best = ((dist, g.frame), j)
        if best is not None:
            taken[best[1]] = True
            flags[i] = True
    return flags


def average_precision(flags: Sequence[bool], num_gt: int) -> float:
    """All-point interpolated AP of TP/FP flags given in score order.

    Precision is replaced by its running maximum from the right before being
    weighted by each recall step. ``num_gt == 0`` gives NaN.
    """
    if num_gt <= 0:
        return float("nan")
    f = np.asarray(flags, dtype=bool)
    if f.size == 0:
        return 0.0
    tp = np.cumsum(f)
    precision = tp / np.arange(1, f.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    return float(np.sum(envelope[f]) / num_gt)


def _pair_videos(dets: Iterable[EventSet], gt: Iterable[EventSet]):
    gt_map = {}
    for es in gt:
        gt_map.setdefault(es.video, []).extend(es.events)
    det_map = {}
    for es in dets:
        if es.video not in gt_map:
            raise VideoMismatchError(f"detections for unknown video {es.video!r}")
        det_map.setdefault(es.video, []).extend(es.events)
    return [(v, det_map.get(v, []), g) for v, g in gt_map.items()]


def evaluate(dets: Iterable[EventSet], gt: Iterable[EventSet], cfg: EvalConfig = EvalConfig()) -> list[ApReport]:
    """Per-class AP and mAP at each tolerance, pooling detections across videos."""
    videos = _pair_videos(list(dets), list(gt))
    gt_count: dict[int, int] = {}
    for _, _, g in videos:
        for ev in g:
            gt_count[ev.label] = gt_count.get(ev.label, 0) + 1

    reports = []
    for delta, delta_f in zip(cfg.tolerances, cfg.frame_tolerances()):
        ranked: dict[int, list] = {}
        for vi, (_, d, g) in enumerate(videos):
            flags = match_detections(d, g, delta_f)
            for i, ev in enumerate(d):
                ranked.setdefault(ev.label, []).append((-_score(ev), ev.frame, vi, i, bool(flags[i])))
        rep = ApReport(delta, delta_f)
        for c in sorted(gt_count):
            rows = sorted(ranked.get(c, []))
            f = [r[-1] for r in rows]
            rep.per_class[c] = average_precision(f, gt_count[c])
            rep.counts[c] = (sum(f), len(f) - sum(f), gt_count[c])
        # detections of classes without ground truth are ignored
        rep.mAP = float(np.mean(list(rep.per_class.values()))) if rep.per_class else 0.0
        reports.append(rep)
    return reports


def reports_to_csv(reports: Sequence[ApReport], classes: Sequence[str] | None = None) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["delta", "delta_frames", "class", "ap", "tp", "fp", "gt"])
    for rep in reports:
        for c, ap in sorted(rep.per_class.items()):
            tp, fp, g = rep.counts[c]
            w.writerow([rep.delta, rep.delta_frames, classes[c - 1] if classes else c, ap, tp, fp, g])
        w.writerow([rep.delta, rep.delta_frames, "mAP", rep.mAP, "", "", ""])
    return buf.getvalue()


def cost_ratio(resolutions: Sequence[tuple[int, int]], reference: tuple[int, int]) -> float:
    """Pixels processed per frame relative to a reference resolution."""
    if any(w < 1 or h < 1 for w, h in list(resolutions) + [reference]):
        raise ValidationError("resolutions must be positive")
    return sum(w * h for w, h in resolutions) / (reference[0] * reference[1])


def gflops_estimate(resolutions, reference, reference_gflops: float) -> float:
    """Scale a measured GFLOPs figure by the pixel ratio."""
    return reference_gflops * cost_ratio(resolutions, reference)
