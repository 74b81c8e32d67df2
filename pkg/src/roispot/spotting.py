"""Inference-side score math: fusion, clip aggregation, temporal NMS and losses."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Event,
    EventSet,
    FeatureSequence,
    ScoreSequence,
    ValidationError,
    as_array,
)

LOG_FLOOR = 1e-12


class NmsMode(str, enum.Enum):
    SOFT = "soft"
    HARD = "hard"


@dataclass(frozen=True)
class NmsConfig:
    window: int = 2
    mode: NmsMode = NmsMode.SOFT
    score_floor: float = 1e-4

    def __post_init__(self):
        if self.window < 0:
            raise ValidationError(f"NMS window must be >= 0, got {self.window}")
        object.__setattr__(self, "mode", NmsMode(self.mode))


@dataclass(frozen=True)
class LossConfig:
    fg_weight: float = 5.0
    lambda_fused: float = 1 / 3
    lambda_low: float = 1 / 3
    lambda_high: float = 1 / 3

    def __post_init__(self):
        if not self.fg_weight > 0:
            raise ValidationError("foreground weight must be > 0")
        if min(self.lambda_fused, self.lambda_low, self.lambda_high) < 0:
            raise ValidationError("loss coefficients must be >= 0")


@dataclass(frozen=True)
class Detection:
    label: int
    frame: int
    score: float


def fuse_max(a, b) -> FeatureSequence:
    """Element-wise maximum of two aligned feature sequences."""
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise ValidationError(f"cannot fuse shapes {a.shape} and {b.shape}")
    return FeatureSequence(np.maximum(a, b))


def aggregate_clips(clips: Sequence, length: int) -> ScoreSequence:
    """Average overlapping clip predictions back onto the video timeline.

    ``clips`` holds ``(start_frame, scores)`` pairs. Rows past the end of
    the video are dropped. Clips are accumulated in ascending start order
    whatever order they are passed in, so the sum is reproducible.
    """
    if not clips:
        raise ValidationError("no clips to aggregate")
    items = sorted(((int(s), as_array(c)) for s, c in clips), key=lambda it: it[0])
    width = items[0][1].shape[1]
    total = np.zeros((length, width))
    count = np.zeros(length, dtype=np.int64)
    for start, rows in items:
        if rows.ndim != 2 or rows.shape[1] != width:
            raise ValidationError("clips disagree on the number of classes")
        if start < 0:
            raise ValidationError(f"clip start {start} is negative")
        stop = min(start + rows.shape[0], length)
        if stop <= start:
            continue
        total[start:stop] += rows[: stop - start]
        count[start:stop] += 1
    if np.any(count == 0):
        raise ValidationError(f"frame {int(np.argmin(count))} is not covered by any clip")
    return ScoreSequence(total / count[:, None])


def clip_starts(length: int, clip_len: int, overlap: float = 0.5) -> list[int]:
    """Start frames for clips of ``clip_len`` with the given overlap covering ``length`` frames."""
    stride = max(1, int(round(clip_len * (1 - overlap))))
    starts = list(range(0, max(length - clip_len, 0) + 1, stride))
    if starts[-1] + clip_len < length:
        starts.append(length - clip_len)
    return starts


def _suppress(scores, window: int, soft: bool, score_floor: float, label: int) -> list[Detection]:
    s = np.array(as_array(scores), dtype=np.float64).ravel()
    if s.size and (s.min() < 0 or s.max() > 1):
        raise ValidationError("NMS scores must lie in [0, 1]")
    live = np.ones(s.size, dtype=bool)
    out = []
    while live.any():
        masked = np.where(live, s, -np.inf)
        t = int(np.argmax(masked))
        if masked[t] < score_floor:
            break
        out.append(Detection(label, t, float(s[t])))
        live[t] = False
        lo, hi = max(0, t - window), min(s.size, t + window + 1)
        for u in range(lo, hi):
            if not live[u]:
                continue
            if soft:
                s[u] *= abs(u - t) / (window + 1)
            else:
                live[u] = False
    return out


def soft_nms_1d(scores, window: int, score_floor: float = 1e-4, label: int = 0) -> list[Detection]:
    """Greedy peak picking with linear decay ``|t - t*| / (window + 1)`` of neighbours."""
    return _suppress(scores, window, True, score_floor, label)


def hard_nms_1d(scores, window: int, score_floor: float = 1e-4, label: int = 0) -> list[Detection]:
    """Greedy peak picking that removes every frame within ``window`` of a peak."""
    return _suppress(scores, window, False, score_floor, label)


def nms_1d(scores, cfg: NmsConfig, label: int = 0) -> list[Detection]:
    return _suppress(scores, cfg.window, cfg.mode is NmsMode.SOFT, cfg.score_floor, label)


def extract_detections(seq, cfg: NmsConfig, video: str = "") -> EventSet:
    """Run NMS independently on every non-background class column."""
    p = as_array(seq)
    events = []
    for c in range(1, p.shape[1]):
        for d in nms_1d(p[:, c], cfg, label=c):
            events.append(Event(d.label, d.frame, d.score))
    return EventSet(video, tuple(events), num_frames=p.shape[0], num_classes=p.shape[1] - 1)


def softmax(logits, axis: int = -1) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = np.exp(z - z.max(axis=axis, keepdims=True))
    return z / z.sum(axis=axis, keepdims=True)


def weighted_cross_entropy(probs, labels, fg_weight: float = 5.0) -> float:
    """Frame-averaged cross-entropy with foreground frames weighted by ``fg_weight``."""
    p = as_array(probs)
    y = np.asarray(labels)
    if y.shape != (p.shape[0],):
        raise ValidationError(f"expected {p.shape[0]} labels, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= p.shape[1]):
        raise ValidationError("label index out of range")
    picked = p[np.arange(p.shape[0]), y]
    weights = np.where(y >= 1, fg_weight, 1.0)
    return float(np.mean(-weights * np.log(np.maximum(picked, LOG_FLOOR))))


def combined_loss(fused: float, low: float, high: float, cfg: LossConfig = LossConfig()) -> float:
    return cfg.lambda_fused * fused + cfg.lambda_low * low + cfg.lambda_high * high
