"""Domain types shared by every stage of the pipeline.

All containers are frozen dataclasses holding numpy arrays. Arrays are
validated on construction (shape, finiteness, stage-specific ranges) and
marked read-only so a value cannot change after it has been checked.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np


class RoispotError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RoispotError, ValueError):
    """A value violates the invariants of its domain type."""


PROB_ATOL = 1e-5


def _frozen_array(data, ndim: int, name: str) -> np.ndarray:
    arr = np.array(data, copy=True)
    if arr.dtype.kind not in "fiu":
        raise ValidationError(f"{name}: expected a real array, got dtype {arr.dtype}")
    if arr.dtype.kind != "f":
        arr = arr.astype(np.float64)
    if arr.ndim != ndim:
        raise ValidationError(f"{name}: expected rank {ndim}, got shape {arr.shape}")
    if any(n < 1 for n in arr.shape):
        raise ValidationError(f"{name}: every dimension must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name}: contains non-finite values")
    arr.flags.writeable = False
    return arr


def as_array(value) -> np.ndarray:
    """Return the array behind a domain value, or the value itself as an array."""
    return np.asarray(getattr(value, "data", value))


@dataclass(frozen=True)
class FeatureVolume:
    """Per-clip spatial feature maps laid out ``[L][H_s][W_s][d]``."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(self.data, 4, "FeatureVolume"))

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def channels(self) -> int:
        return self.data.shape[3]


class Stage(str, enum.Enum):
    RAW = "raw"
    NORMALIZED = "normalized"
    UPSAMPLED = "upsampled"
    SMOOTHED = "smoothed"
    PROBABILITY = "probability"


@dataclass(frozen=True)
class SaliencyVolume:
    """Scalar saliency maps ``[L][H][W]`` tagged with the pipeline stage that produced them."""

    data: np.ndarray
    stage: Stage = Stage.RAW

    def __post_init__(self):
        arr = _frozen_array(self.data, 3, "SaliencyVolume")
        stage = Stage(self.stage)
        if stage is not Stage.RAW and arr.min() < 0:
            raise ValidationError(f"SaliencyVolume[{stage.value}]: negative values")
        if stage in (Stage.NORMALIZED, Stage.UPSAMPLED, Stage.SMOOTHED) and arr.max() > 1:
            raise ValidationError(f"SaliencyVolume[{stage.value}]: values above 1")
        if stage is Stage.PROBABILITY:
            sums = arr.sum(axis=(1, 2), dtype=np.float64)
            if np.any(np.abs(sums - 1.0) > PROB_ATOL):
                raise ValidationError("SaliencyVolume[probability]: frame sums deviate from 1")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "stage", stage)

    @property
    def frames(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class ScoreSequence:
    """Per-frame class scores ``[T][C+1]``; column 0 is the background class."""

    data: np.ndarray
    probabilities: bool = False

    def __post_init__(self):
        arr = _frozen_array(self.data, 2, "ScoreSequence")
        if self.probabilities:
            if arr.min() < 0 or arr.max() > 1:
                raise ValidationError("ScoreSequence: probabilities outside [0, 1]")
            if np.any(np.abs(arr.sum(axis=1, dtype=np.float64) - 1.0) > PROB_ATOL):
                raise ValidationError("ScoreSequence: probability rows do not sum to 1")
        object.__setattr__(self, "data", arr)

    @property
    def length(self) -> int:
        return self.data.shape[0]

    @property
    def num_classes(self) -> int:
        """Number of event classes, background excluded."""
        return self.data.shape[1] - 1


@dataclass(frozen=True)
class FeatureSequence:
    """Per-frame global feature vectors ``[L][d]``."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(self.data, 2, "FeatureSequence"))


@dataclass(frozen=True)
class FrameGeometry:
    high_w: int
    high_h: int
    low_w: int
    low_h: int

    def __post_init__(self):
        if not (self.high_w >= self.low_w >= 1 and self.high_h >= self.low_h >= 1):
            raise ValidationError(f"invalid frame geometry {self}")


@dataclass(frozen=True)
class Event:
    """A single event: class label index (1..C), frame index and optional score."""

    label: int
    frame: int
    score: Optional[float] = None

    def __post_init__(self):
        if self.label < 1:
            raise ValidationError(f"event class index must be >= 1, got {self.label}")
        if self.frame < 0:
            raise ValidationError(f"event frame must be >= 0, got {self.frame}")
        if self.score is not None and not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"event score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class EventSet:
    video: str
    events: tuple = field(default_factory=tuple)
    num_frames: Optional[int] = None
    num_classes: Optional[int] = None

    def __post_init__(self):
        events = tuple(self.events)
        for ev in events:
            if self.num_frames is not None and ev.frame >= self.num_frames:
                raise ValidationError(
                    f"{self.video}: event frame {ev.frame} outside video of {self.num_frames} frames"
                )
            if self.num_classes is not None and ev.label > self.num_classes:
                raise ValidationError(
                    f"{self.video}: class index {ev.label} exceeds class count {self.num_classes}"
                )
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)


def round_half_up(x) -> int:
    """Round to the nearest integer, halves away from -inf."""
    return int(np.floor(x + 0.5))


def parse_size(text: str) -> tuple[int, int]:
    """Parse ``"WxH"`` into ``(W, H)``."""
    try:
        w, h = text.lower().split("x")
        size = int(w), int(h)
    except ValueError:
        raise ValidationError(f"expected a size like 112x112, got {text!r}") from None
    if min(size) < 1:
        raise ValidationError(f"size must be positive, got {text!r}")
    return size


def check_labels(labels: Sequence[str]) -> list[str]:
    labels = list(labels)
    if len(set(labels)) != len(labels):
        raise ValidationError("class vocabulary contains duplicates")
    if not all(isinstance(x, str) and x for x in labels):
        raise ValidationError("class vocabulary must be non-empty strings")
    return labels
