import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from roispot.core import ScoreSequence, ValidationError
from roispot.spotting import (
    LossConfig,
    NmsConfig,
    NmsMode,
    aggregate_clips,
    clip_starts,
    combined_loss,
    extract_detections,
    fuse_max,
    hard_nms_1d,
    nms_1d,
    soft_nms_1d,
    softmax,
    weighted_cross_entropy,
)


def pairs(dets):
    return [(d.frame, round(d.score, 12)) for d in dets]


def test_soft_hand_case():
    assert pairs(soft_nms_1d([0.9, 0.8, 0.1], 1)) == [(0, 0.9), (1, 0.4), (2, 0.05)]


def test_hard_hand_case():
    assert pairs(hard_nms_1d([0.9, 0.8, 0.1], 1)) == [(0, 0.9), (2, 0.1)]


def test_window_zero_returns_all_above_floor():
    s = [0.3, 0.00005, 0.7, 0.2]
    assert pairs(soft_nms_1d(s, 0)) == [(2, 0.7), (0, 0.3), (3, 0.2)]
    assert pairs(soft_nms_1d(s, 0)) == pairs(hard_nms_1d(s, 0))


def test_ties_take_earliest_frame():
    assert [d.frame for d in hard_nms_1d([0.5, 0.2, 0.5], 0)] == [0, 2, 1]


def test_scores_out_of_range():
    with pytest.raises(ValidationError):
        soft_nms_1d([1.2], 1)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(0, 5))
def test_hard_spacing_and_soft_superset(scores, window):
    hard = hard_nms_1d(scores, window)
    frames = sorted(d.frame for d in hard)
    assert all(b - a > window for a, b in zip(frames, frames[1:]))
    soft = soft_nms_1d(scores, window)
    assert len({d.frame for d in soft}) == len(soft)
    assert all(0 <= d.score <= 1 for d in soft)
    # scores come out non-increasing in both modes
    assert all(a.score >= b.score for a, b in zip(hard, hard[1:]))
    assert all(a.score >= b.score for a, b in zip(soft, soft[1:]))


def test_extract_detections_per_class():
    p = np.array([[0.1, 0.9, 0.0], [0.5, 0.2, 0.3], [0.0, 0.0, 1.0]])
    es = extract_detections(ScoreSequence(p, probabilities=True), NmsConfig(1, NmsMode.HARD), "v")
    assert es.video == "v" and es.num_classes == 2
    # zero scores sit below the floor and are never reported
    assert [(e.label, e.frame, e.score) for e in es] == [(1, 0, 0.9), (2, 2, 1.0)]


def test_nms_config():
    with pytest.raises(ValidationError):
        NmsConfig(window=-1)
    assert nms_1d([0.5], NmsConfig())[0].score == 0.5


def test_aggregate_overlapping_clips():
    a = np.array([[1.0, 0.0], [0.5, 0.5]])
    b = np.array([[0.0, 1.0], [0.2, 0.8], [0.9, 0.1]])
    out = aggregate_clips([(1, b), (0, a)], 3).data
    np.testing.assert_allclose(out, [[1, 0], [0.25, 0.75], [0.2, 0.8]])


def test_aggregate_gap_rejected():
    with pytest.raises(ValidationError):
        aggregate_clips([(0, np.ones((2, 2)) / 2)], 3)


def test_clip_starts_cover():
    starts = clip_starts(100, 32)
    assert starts[0] == 0 and starts[-1] + 32 >= 100
    assert clip_starts(10, 32) == [0]


def test_fuse_max():
    out = fuse_max(np.array([[1.0, -2.0]]), np.array([[0.0, 3.0]]))
    np.testing.assert_array_equal(out.data, [[1, 3]])
    with pytest.raises(ValidationError):
        fuse_max(np.ones((2, 2)), np.ones((2, 3)))


def test_cross_entropy_values():
    uniform = np.full((2, 3), 1 / 3)
    assert math.isclose(weighted_cross_entropy(uniform, [0, 0]), math.log(3))
    assert math.isclose(weighted_cross_entropy(uniform, [1, 2]), 5 * math.log(3))
    assert weighted_cross_entropy(np.eye(3), [0, 1, 2]) == 0


def test_softmax_rows():
    s = softmax(np.array([[1000.0, 1000.0], [0.0, math.log(3)]]))
    np.testing.assert_allclose(s, [[0.5, 0.5], [0.25, 0.75]])


def test_combined_loss():
    assert math.isclose(combined_loss(3, 0, 0), 1.0)
    assert math.isclose(combined_loss(1, 2, 3, LossConfig(5.0, 1.0, 0.0, 1.0)), 4.0)
