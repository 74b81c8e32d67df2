"""Binary tensor files and JSON Lines event files.

Tensor layout (little-endian)::

    bytes 0-3   magic b"ASV1"
    byte  4     dtype code, 0 = float32
    byte  5     rank r, 1..4
    bytes 6-7   zero
    r * u64     dims
    payload     row-major values

The only dtype is float32, so arrays are stored at single precision. A
float32 array round-trips bit-exactly; float64 arrays are rounded on write.
"""

from __future__ import annotations

import json
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import (
    Event,
    EventSet,
    FeatureSequence,
    FeatureVolume,
    RoispotError,
    SaliencyVolume,
    ScoreSequence,
    Stage,
    ValidationError,
    as_array,
    check_labels,
)

MAGIC = b"ASV1"
DTYPE_FLOAT32 = 0
_HEADER = struct.Struct("<4sBBH")
_MAX_BYTES = 2**62


class TensorFormatError(RoispotError):
    """Base class for malformed tensor files."""


class BadMagicError(TensorFormatError):
    pass


class UnsupportedDtypeError(TensorFormatError):
    pass


class UnsupportedRankError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


class DimOverflowError(TensorFormatError):
    pass


class EventFormatError(RoispotError):
    """A line of an event file is not a well-formed event record."""


PathLike = Union[str, Path]


def encode_tensor(value) -> bytes:
    arr = as_array(value)
    if arr.ndim < 1 or arr.ndim > 4:
        raise ValidationError(f"tensor rank must be 1..4, got {arr.ndim}")
    if any(n < 1 for n in arr.shape):
        raise ValidationError(f"tensor dims must be >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("tensor contains non-finite values")
    payload = np.ascontiguousarray(arr, dtype="<f4").tobytes()
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    return _HEADER.pack(MAGIC, DTYPE_FLOAT32, arr.ndim, 0) + dims + payload


def decode_tensor(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size:
        raise TruncatedPayloadError(f"file too short for header ({len(buf)} bytes)")
    magic, dtype, rank, pad = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtypeError(f"unsupported dtype code {dtype}")
    if not 1 <= rank <= 4 or pad != 0:
        raise UnsupportedRankError(f"unsupported rank {rank}")
    off = _HEADER.size + 8 * rank
    if len(buf) < off:
        raise TruncatedPayloadError("file too short for dimension table")
    dims = struct.unpack_from(f"<{rank}Q", buf, _HEADER.size)
    nbytes = 4
    for n in dims:
        if n == 0:
            raise DimOverflowError(f"zero-length dimension in {dims}")
        nbytes *= n
        if nbytes > _MAX_BYTES:
            raise DimOverflowError(f"dims {dims} exceed the addressable payload size")
    if len(buf) - off < nbytes:
        raise TruncatedPayloadError(f"payload has {len(buf) - off} bytes, expected {nbytes}")
    if len(buf) - off > nbytes:
        raise TensorFormatError(f"{len(buf) - off - nbytes} trailing bytes after payload")
    arr = np.frombuffer(buf, dtype="<f4", count=nbytes // 4, offset=off).reshape(dims)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("tensor contains non-finite values")
    return arr.astype(np.float32)


def read_tensor(path: PathLike, kind: str = "scores", stage=Stage.RAW, probabilities: bool = False):
    """Load a tensor file and wrap it in the domain type implied by its rank.

    Rank 4 gives a FeatureVolume and rank 3 a SaliencyVolume tagged with
    ``stage``. Rank 2 is ambiguous; ``kind`` chooses between ``"scores"``
    (ScoreSequence) and ``"features"`` (FeatureSequence). Rank 1 comes back
    as a bare array.
    """
    arr = decode_tensor(Path(path).read_bytes())
    if arr.ndim == 4:
        return FeatureVolume(arr)
    if arr.ndim == 3:
        return SaliencyVolume(arr, stage)
    if arr.ndim == 2:
        if kind == "features":
            return FeatureSequence(arr)
        if kind == "scores":
            return ScoreSequence(arr, probabilities=probabilities)
        raise ValueError(f"unknown rank-2 kind {kind!r}")
    return arr


def write_tensor(value, path: PathLike) -> None:
    Path(path).write_bytes(encode_tensor(value))


def read_class_list(path: PathLike) -> list[str]:
    try:
        labels = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise EventFormatError(f"{path}: class list is not valid JSON ({exc})") from None
    if not isinstance(labels, list):
        raise EventFormatError(f"{path}: class list must be a JSON array")
    return check_labels(labels)


def write_class_list(labels: Sequence[str], path: PathLike) -> None:
    Path(path).write_text(json.dumps(check_labels(labels)) + "\n")


def parse_events(lines: Iterable[str], classes: Sequence[str]) -> list[EventSet]:
    index = {name: i + 1 for i, name in enumerate(check_labels(classes))}
    grouped: "OrderedDict[str, list[Event]]" = OrderedDict()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EventFormatError(f"line {lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise EventFormatError(f"line {lineno}: expected a JSON object")
        video, frame, label = rec.get("video"), rec.get("frame"), rec.get("class")
        score = rec.get("score")
        if not isinstance(video, str) or not isinstance(label, str):
            raise EventFormatError(f"line {lineno}: 'video' and 'class' must be strings")
        if isinstance(frame, bool) or not isinstance(frame, int):
            raise EventFormatError(f"line {lineno}: 'frame' must be an integer")
        if score is not None and (isinstance(score, bool) or not isinstance(score, (int, float))):
            raise EventFormatError(f"line {lineno}: 'score' must be a number")
        if label not in index:
            raise ValidationError(f"line {lineno}: unknown class {label!r}")
        try:
            ev = Event(index[label], frame, None if score is None else float(score))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
        grouped.setdefault(video, []).append(ev)
    return [EventSet(v, tuple(evs), num_classes=len(index)) for v, evs in grouped.items()]


def read_events(path: PathLike, classes: Sequence[str]) -> list[EventSet]:
    """Read a JSON Lines event file, grouping events by video in file order."""
    with open(path) as fh:
        return parse_events(fh, classes)


def format_events(sets: Iterable[EventSet], classes: Sequence[str]) -> str:
    classes = check_labels(classes)
    out = []
    for es in sets:
        for ev in es.events:
            if not 1 <= ev.label <= len(classes):
                raise ValidationError(f"class index {ev.label} outside vocabulary")
            rec = {"video": es.video, "frame": ev.frame, "class": classes[ev.label - 1]}
            if ev.score is not None:
                rec["score"] = ev.score
            out.append(json.dumps(rec) + "\n")
    return "".join(out)


def write_events(sets: Iterable[EventSet], path: PathLike, classes: Sequence[str]) -> None:
    Path(path).write_text(format_events(sets, classes))


def events_by_video(sets: Iterable[EventSet]) -> "OrderedDict[str, EventSet]":
    """Index event sets by video id; repeated ids are merged in order."""
    out: "OrderedDict[str, EventSet]" = OrderedDict()
    for es in sets:
        if es.video in out:
            prev = out[es.video]
            es = EventSet(es.video, prev.events + es.events, num_classes=prev.num_classes)
        out[es.video] = es
    return out


def load_json(path: Optional[PathLike]) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise EventFormatError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(cfg, dict):
        raise EventFormatError(f"{path}: expected a JSON object")
    return cfg
