import json
import struct

import numpy as np
import pytest

from roispot import io
from roispot.core import (
    Event,
    EventSet,
    FeatureSequence,
    FeatureVolume,
    SaliencyVolume,
    ScoreSequence,
    Stage,
    ValidationError,
)


def test_saliency_round_trip(tmp_path):
    data = np.arange(32, dtype=np.float32).reshape(2, 4, 4) / 7
    io.write_tensor(SaliencyVolume(data), tmp_path / "s.asv")
    back = io.read_tensor(tmp_path / "s.asv")
    assert isinstance(back, SaliencyVolume)
    assert (back.frames, back.height, back.width) == (2, 4, 4)
    assert back.data.tobytes() == data.tobytes()


def test_feature_volume_rank4(tmp_path, rng):
    data = rng.standard_normal((1, 7, 7, 8)).astype(np.float32)
    io.write_tensor(FeatureVolume(data), tmp_path / "f.asv")
    back = io.read_tensor(tmp_path / "f.asv")
    assert isinstance(back, FeatureVolume)
    assert back.channels == 8
    np.testing.assert_array_equal(back.data, data)


def test_rank2_kind(tmp_path):
    io.write_tensor(np.eye(3, dtype=np.float32), tmp_path / "x.asv")
    assert isinstance(io.read_tensor(tmp_path / "x.asv"), ScoreSequence)
    assert isinstance(io.read_tensor(tmp_path / "x.asv", kind="features"), FeatureSequence)


def test_header_layout():
    buf = io.encode_tensor(np.ones((1, 1, 1), dtype=np.float32))
    assert buf[:4] == b"ASV1"
    assert buf[4] == 0 and buf[5] == 3 and buf[6:8] == b"\0\0"
    assert struct.unpack_from("<3Q", buf, 8) == (1, 1, 1)
    assert struct.unpack_from("<f", buf, 32) == (1.0,)
    assert len(buf) == 36


def test_degenerate_volume_round_trip(tmp_path):
    io.write_tensor(SaliencyVolume(np.array([[[0.5]]], dtype=np.float32)), tmp_path / "one.asv")
    assert io.read_tensor(tmp_path / "one.asv").data.tolist() == [[[0.5]]]


def test_empty_dims_rejected(tmp_path):
    with pytest.raises(ValidationError):
        io.write_tensor(np.zeros((0, 3), dtype=np.float32), tmp_path / "e.asv")
    with pytest.raises(ValidationError):
        io.write_tensor(np.float32(1.0), tmp_path / "e.asv")


def test_non_finite_rejected(tmp_path):
    with pytest.raises(ValidationError):
        io.write_tensor(np.array([1.0, np.nan]), tmp_path / "n.asv")
    raw = io.encode_tensor(np.ones(2, dtype=np.float32))
    raw = raw[:-4] + struct.pack("<f", float("inf"))
    with pytest.raises(ValidationError):
        io.decode_tensor(raw)


@pytest.mark.parametrize(
    "mutate, error",
    [
        (lambda b: b"XXXX" + b[4:], io.BadMagicError),
        (lambda b: b[:4] + b"\x01" + b[5:], io.UnsupportedDtypeError),
        (lambda b: b[:5] + b"\x05" + b[6:], io.UnsupportedRankError),
        (lambda b: b[:-1], io.TruncatedPayloadError),
        (lambda b: b[:10], io.TruncatedPayloadError),
        (lambda b: b[:8] + struct.pack("<Q", 2**62) + b[16:], io.DimOverflowError),
        (lambda b: b + b"\0", io.TensorFormatError),
    ],
)
def test_format_errors(mutate, error):
    buf = io.encode_tensor(np.ones((2, 2), dtype=np.float32))
    with pytest.raises(error):
        io.decode_tensor(mutate(buf))


def test_format_errors_are_distinct():
    kinds = [io.BadMagicError, io.UnsupportedDtypeError, io.TruncatedPayloadError, io.DimOverflowError]
    assert len(set(kinds)) == 4
    assert all(issubclass(k, io.TensorFormatError) for k in kinds)


CLASSES = ["serve", "hit"]


def test_single_event_line():
    (es,) = io.parse_events(['{"video":"v1","frame":10,"class":"serve"}'], CLASSES)
    assert es.video == "v1"
    assert es.events == (Event(1, 10),)


def test_negative_frame_rejected():
    with pytest.raises(ValidationError, match="line 1"):
        io.parse_events(['{"video":"v1","frame":-1,"class":"serve"}'], CLASSES)


def test_unknown_class_rejected():
    with pytest.raises(ValidationError, match="line 2"):
        io.parse_events(['{"video":"v","frame":1,"class":"hit"}', '{"video":"v","frame":2,"class":"lob"}'],
                        CLASSES)


def test_malformed_line_reports_number():
    with pytest.raises(io.EventFormatError, match="line 2"):
        io.parse_events(['{"video":"v","frame":1,"class":"hit"}', "{not json"], CLASSES)
    with pytest.raises(io.EventFormatError):
        io.parse_events(['{"video":"v","frame":1.5,"class":"hit"}'], CLASSES)


def test_interleaved_videos_grouped():
    lines = [
        '{"video":"a","frame":1,"class":"serve"}',
        '{"video":"b","frame":2,"class":"hit"}',
        '{"video":"a","frame":3,"class":"hit","score":0.5}',
    ]
    sets = io.parse_events(lines, CLASSES)
    assert [s.video for s in sets] == ["a", "b"]
    assert [e.frame for e in sets[0]] == [1, 3]
    assert sets[0].events[1].score == 0.5


def test_event_round_trip(tmp_path):
    sets = [
        EventSet("a", (Event(1, 4, 0.1234567890123), Event(2, 9, 1.0))),
        EventSet("b", (Event(2, 0),)),
    ]
    io.write_events(sets, tmp_path / "e.jsonl", CLASSES)
    back = io.read_events(tmp_path / "e.jsonl", CLASSES)
    assert [(s.video, s.events) for s in back] == [(s.video, s.events) for s in sets]
    io.write_class_list(CLASSES, tmp_path / "c.json")
    assert io.read_class_list(tmp_path / "c.json") == CLASSES
    assert json.loads((tmp_path / "c.json").read_text()) == CLASSES


def test_event_set_bounds():
    with pytest.raises(ValidationError):
        EventSet("v", (Event(1, 10),), num_frames=10)
    with pytest.raises(ValidationError):
        EventSet("v", (Event(3, 1),), num_classes=2)


def test_probability_stage_validated():
    with pytest.raises(ValidationError):
        SaliencyVolume(np.full((1, 2, 2), 0.3), Stage.PROBABILITY)
    SaliencyVolume(np.full((1, 2, 2), 0.25), Stage.PROBABILITY)
    with pytest.raises(ValidationError):
        SaliencyVolume(-np.ones((1, 2, 2)), Stage.NORMALIZED)


def test_values_are_immutable():
    fv = FeatureVolume(np.ones((1, 1, 1, 1)))
    with pytest.raises(ValueError):
        fv.data[0, 0, 0, 0] = 2
