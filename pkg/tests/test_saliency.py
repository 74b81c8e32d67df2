import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from roispot.core import FeatureVolume, SaliencyVolume, Stage, ValidationError
from roispot.saliency import (
    SaliencyConfig,
    build_saliency,
    channel_average,
    gaussian_kernel1d,
    gaussian_smooth_st,
    minmax_normalize,
    probability_normalize,
    upsample_bilinear,
)
from roispot.synth import SynthConfig, gen_scene, oracle_conv3d

finite = st.floats(-100, 100, allow_nan=False, allow_infinity=False)


def sv(a, stage=Stage.RAW):
    return SaliencyVolume(np.asarray(a, dtype=np.float64), stage)


class TestChannelAverage:
    def test_example(self):
        fv = FeatureVolume([[[[1, 3], [2, 4]], [[0, 2], [5, 5]]]])
        np.testing.assert_array_equal(channel_average(fv).data, [[[2, 3], [1, 5]]])

    def test_single_channel_identity(self, rng):
        x = rng.standard_normal((2, 3, 4, 1))
        np.testing.assert_array_equal(channel_average(FeatureVolume(x)).data, x[..., 0])

    @given(arrays(np.float64, (2, 3, 3, 5), elements=finite), st.permutations(range(5)))
    def test_permutation_invariant(self, x, perm):
        a = channel_average(FeatureVolume(x)).data
        b = channel_average(FeatureVolume(x[..., list(perm)])).data
        assert a.tobytes() == b.tobytes()


class TestMinMax:
    def test_example(self):
        out = minmax_normalize(sv([[[2, 3], [1, 5]]]))
        np.testing.assert_array_equal(out.data, [[[0.25, 0.5], [0, 1]]])
        assert out.stage is Stage.NORMALIZED

    def test_constant_frame(self):
        out = minmax_normalize(sv([[[7, 7], [7, 7]], [[0, 1], [2, 3]]]))
        np.testing.assert_array_equal(out.data[0], 0)
        assert out.data[1].max() == 1

    @given(arrays(np.float64, (2, 3, 4), elements=finite), st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_invariance_and_range(self, x, a, b):
        x = x + np.arange(12).reshape(3, 4)  # keep frames non-degenerate
        n = minmax_normalize(sv(x)).data
        assert n.min() == 0 and n.max() == 1
        np.testing.assert_allclose(minmax_normalize(sv(a * x + b)).data, n, atol=1e-9)


class TestUpsample:
    def test_row_example(self):
        out = upsample_bilinear(sv([[[0, 1]]], Stage.NORMALIZED), 2)
        np.testing.assert_allclose(out.data[0], [[0, 0.25, 0.75, 1]] * 2)
        assert out.data.shape == (1, 2, 4)

    def test_k1_identity(self, rng):
        x = rng.random((2, 3, 5))
        assert upsample_bilinear(sv(x, Stage.NORMALIZED), 1).data.tobytes() == x.tobytes()

    @given(arrays(np.float64, (1, 3, 4), elements=st.floats(0, 1)), st.integers(1, 6))
    def test_range_bounded(self, x, k):
        out = upsample_bilinear(sv(x, Stage.NORMALIZED), k).data
        assert out.shape == (1, 3 * k, 4 * k)
        assert out.min() >= x.min() and out.max() <= x.max()

    def test_hand_mapping_2d(self):
        # output cell (u, v) samples ((u+0.5)/k - 0.5, (v+0.5)/k - 0.5), clamped
        x = np.array([[[0.0, 1.0], [1.0, 0.0]]])
        out = upsample_bilinear(sv(x, Stage.NORMALIZED), 2).data[0]
        c = np.array([0, 0.25, 0.75, 1])
        expect = c[None, :] + c[:, None] - 2 * c[:, None] * c[None, :]
        np.testing.assert_allclose(out, expect)


class TestGaussian:
    @pytest.mark.parametrize("sigma", [0.3, 1.0, 1.5, 2.0, 3.7])
    def test_kernel(self, sigma):
        g = gaussian_kernel1d(sigma)
        assert len(g) == 2 * math.ceil(3 * sigma) + 1
        assert abs(g.sum() - 1) < 1e-7
        np.testing.assert_array_equal(g, g[::-1])

    def test_impulse_response(self):
        x = np.zeros((1, 15, 15))
        x[0, 7, 7] = 1
        out = gaussian_smooth_st(sv(x, Stage.UPSAMPLED), 1.5, 0).data[0]
        g = gaussian_kernel1d(1.5)
        r = len(g) // 2
        expect = np.zeros((15, 15))
        expect[7 - r:8 + r, 7 - r:8 + r] = np.outer(g, g)
        np.testing.assert_allclose(out, expect, atol=1e-15)

    def test_constant_preserved(self):
        x = np.full((3, 6, 5), 0.4)
        out = gaussian_smooth_st(sv(x, Stage.UPSAMPLED), 2.0, 1.5).data
        np.testing.assert_allclose(out, 0.4, atol=1e-12)

    def test_matches_dense_oracle(self, rng):
        x = rng.random((3, 6, 6))
        out = gaussian_smooth_st(sv(x, Stage.UPSAMPLED), 1.2, 0.8).data
        assert np.abs(out - oracle_conv3d(x, 1.2, 0.8)).max() < 1e-6

    def test_mass_preserved_away_from_edges(self, rng):
        x = np.zeros((9, 30, 30))
        x[3:6, 10:20, 10:20] = rng.random((3, 10, 10))
        out = gaussian_smooth_st(sv(x, Stage.UPSAMPLED), 1.5, 1.0).data
        assert abs(out.sum() - x.sum()) < 1e-5

    def test_rejects_raw(self):
        with pytest.raises(ValidationError):
            gaussian_smooth_st(sv([[[1.0]]]), 1.0, 0)


class TestProbability:
    def test_example(self):
        out = probability_normalize(sv([[[0.25, 0.5], [0, 1]]], Stage.SMOOTHED)).data
        np.testing.assert_allclose(out, np.array([[[0.25, 0.5], [0, 1]]]) / 1.75)
        assert abs(out.sum() - 1) < 1e-12

    def test_zero_frame_uniform(self):
        out = probability_normalize(sv(np.zeros((1, 2, 2)), Stage.SMOOTHED)).data
        np.testing.assert_array_equal(out, 0.25)

    def test_idempotent(self, rng):
        p = probability_normalize(sv(rng.random((3, 4, 5)), Stage.SMOOTHED))
        q = probability_normalize(p)
        np.testing.assert_allclose(q.data, p.data, rtol=1e-14)
        np.testing.assert_allclose(q.data.sum(axis=(1, 2)), 1, atol=1e-5)

    def test_negative_rejected(self):
        with pytest.raises(ValidationError):
            probability_normalize(sv([[[-0.1, 1.0]]]))


class TestBuild:
    @settings(max_examples=25, deadline=None)
    @given(arrays(np.float64, (2, 3, 3, 4), elements=finite), st.integers(1, 4))
    def test_frame_sums(self, x, k):
        out = build_saliency(FeatureVolume(x), SaliencyConfig(k, 1.0, 1.0))
        assert out.stage is Stage.PROBABILITY
        np.testing.assert_allclose(out.data.sum(axis=(1, 2)), 1, atol=1e-5)

    def test_constant_features_uniform(self):
        out = build_saliency(FeatureVolume(np.full((2, 3, 4, 1), 3.0)))
        np.testing.assert_allclose(out.data, 1 / (24 * 32))

    @pytest.mark.parametrize("cy, cx", [(6.0, 6.0), (4.0, 9.0), (7.5, 5.25)])
    def test_blob_peak_location(self, cy, cx):
        cfg = SynthConfig(frames=3, height=14, width=14, start=(cy, cx))
        fv, _ = gen_scene(cfg)
        k = 8
        p = build_saliency(fv, SaliencyConfig(upsample_k=k)).data[1]
        py, px = np.unravel_index(np.argmax(p), p.shape)
        # source coordinate c sits at upsampled coordinate (c + 0.5) k - 0.5
        assert abs(py - ((cy + 0.5) * k - 0.5)) <= 1
        assert abs(px - ((cx + 0.5) * k - 0.5)) <= 1

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            SaliencyConfig(upsample_k=0)
        with pytest.raises(ValidationError):
            SaliencyConfig(sigma_spatial=0)
        with pytest.raises(ValidationError):
            SaliencyConfig(sigma_temporal=-1)
