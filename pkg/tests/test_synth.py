import numpy as np
import pytest

from roispot.core import ValidationError
from roispot.synth import (
    SplitMix64,
    SynthConfig,
    gen_scene,
    ideal_scores,
    rect_iou,
    reversal_frames,
    trajectory,
)


def test_splitmix_reference_values():
    assert SplitMix64(0).next_u64(3).tolist() == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]


def test_splitmix_stream_continues():
    a = SplitMix64(7)
    first, second = a.next_u64(2), a.next_u64(2)
    assert np.array_equal(np.concatenate([first, second]), SplitMix64(7).next_u64(4))


def test_uniform_range():
    u = SplitMix64(1).uniform(1000)
    assert u.min() >= 0 and u.max() < 1
    assert u[0] == (SplitMix64(1).next_u64(1)[0] >> np.uint64(11)) * 2.0**-53


def test_scene_deterministic():
    cfg = SynthConfig(seed=3, noise=0.2, trajectory="bounce", velocity=(0.3, 0.7))
    a, ga = gen_scene(cfg)
    b, gb = gen_scene(cfg)
    assert a.data.tobytes() == b.data.tobytes()
    assert np.array_equal(ga.boxes, gb.boxes)
    c, _ = gen_scene(SynthConfig(seed=4, noise=0.2, trajectory="bounce", velocity=(0.3, 0.7)))
    assert a.data.tobytes() != c.data.tobytes()


def test_bounce_reversals():
    cfg = SynthConfig(frames=30, trajectory="bounce", velocity=(0, 0.5), start=(6.5, 3.0), bounds_x=(3, 7.5))
    assert reversal_frames(cfg) == [9, 18, 27]
    x = trajectory(cfg)[:, 1]
    assert x.min() >= 3 and x.max() <= 7.5
    assert x[9] == 7.5 and x[18] == 3.0


def test_linear_leaving_grid():
    with pytest.raises(ValidationError):
        trajectory(SynthConfig(frames=20, trajectory="linear", velocity=(0, 1)))


def test_channel_layout():
    cfg = SynthConfig(frames=2, channels=8, noise=0.5, active_fraction=0.25, seed=1)
    fv, gt = gen_scene(cfg)
    d = fv.data
    np.testing.assert_array_equal(d[..., 0], d[..., 1])
    # default centre sits on a cell corner
    assert d[..., 0].max() == pytest.approx(np.exp(-0.25))
    assert d[..., 2:].max() < 0.5
    assert len(gt.events) == 0
    assert gt.boxes.shape == (2, 4)


def test_boxes_are_clipped():
    cfg = SynthConfig(frames=1, start=(0.0, 13.0))
    _, gt = gen_scene(cfg)
    x, y, w, h = gt.boxes[0]
    assert x >= 0 and y == 0 and x + w == 14


def test_ideal_scores():
    fv, gt = gen_scene(SynthConfig(frames=30, trajectory="bounce", velocity=(0, 0.5), start=(6.5, 3.0),
                                   bounds_x=(3, 7.5)))
    s = ideal_scores(gt.events, 30).data
    np.testing.assert_allclose(s.sum(axis=1), 1)
    assert s[9, 1] == 1 and s[18, 1] == 1


def test_rect_iou():
    assert rect_iou((0, 0, 2, 2), (1, 0, 2, 2)) == pytest.approx(1 / 3)
    assert rect_iou((0, 0, 2, 2), (1, 1, 2, 2)) == pytest.approx(1 / 7)
    assert rect_iou((0, 0, 1, 1), (5, 5, 1, 1)) == 0
