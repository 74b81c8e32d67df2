"""Saliency maps from spatial feature volumes.

The pipeline is channel average -> per-frame min-max -> bilinear upsampling
-> separable spatio-temporal Gaussian -> per-frame probability maps. All
arithmetic runs in float64 with a fixed per-cell summation order, so results
do not depend on how frames are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FeatureVolume, SaliencyVolume, Stage, ValidationError, as_array


@dataclass(frozen=True)
class SaliencyConfig:
    upsample_k: int = 8
    sigma_spatial: float = 2.0
    sigma_temporal: float = 1.5
    epsilon: float = 1e-8

    def __post_init__(self):
        if int(self.upsample_k) != self.upsample_k or self.upsample_k < 1:
            raise ValidationError(f"upsample_k must be an integer >= 1, got {self.upsample_k}")
        if not self.sigma_spatial > 0:
            raise ValidationError(f"sigma_spatial must be > 0, got {self.sigma_spatial}")
        if not self.sigma_temporal >= 0:
            raise ValidationError(f"sigma_temporal must be >= 0, got {self.sigma_temporal}")
        if not self.epsilon > 0:
            raise ValidationError(f"epsilon must be > 0, got {self.epsilon}")


def channel_average(fv: FeatureVolume) -> SaliencyVolume:
    """Mean over the channel axis.

    Channel values are sorted before summation, which makes the result
    bit-identical under any permutation of the channels.
    """
    data = np.sort(as_array(fv).astype(np.float64), axis=-1)
    return SaliencyVolume(data.sum(axis=-1) / data.shape[-1], Stage.RAW)


def minmax_normalize(sv: SaliencyVolume, epsilon: float = 1e-8) -> SaliencyVolume:
    s = as_array(sv).astype(np.float64)
    lo = s.min(axis=(1, 2), keepdims=True)
    span = s.max(axis=(1, 2), keepdims=True) - lo
    flat = span < epsilon
    out = (s - lo) / np.where(flat, 1.0, span)
    out[np.broadcast_to(flat, out.shape)] = 0.0
    return SaliencyVolume(out, Stage.NORMALIZED)


def resample_coords(n_in: int, n_out: int, scale: float | None = None):
    """Source indices and weights for half-pixel-centre linear resampling.

    Output index ``u`` samples source coordinate ``(u + 0.5) * scale - 0.5``
    clamped to ``[0, n_in - 1]``; ``scale`` defaults to ``n_in / n_out``.
    Returns ``(i0, i1, frac)`` so that ``out = a[i0] * (1 - frac) + a[i1] * frac``.
    """
    if scale is None:
        scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, src - i0


def _lerp_axis(a: np.ndarray, axis: int, i0, i1, frac) -> np.ndarray:
    lo = np.take(a, i0, axis=axis)
    hi = np.take(a, i1, axis=axis)
    shape = [1] * a.ndim
    shape[axis] = -1
    f = frac.reshape(shape)
    out = lo * (1.0 - f) + hi * f
    # keep every sample inside its two neighbours despite rounding
    return np.clip(out, np.minimum(lo, hi), np.maximum(lo, hi))


def resize_bilinear(a: np.ndarray, out_h: int, out_w: int, axes=(0, 1)) -> np.ndarray:
    """Bilinear resize of two axes of ``a`` with the half-pixel convention."""
    ay, ax = axes
    out = np.asarray(a, dtype=np.float64)
    out = _lerp_axis(out, ax, *resample_coords(out.shape[ax], out_w))
    return _lerp_axis(out, ay, *resample_coords(out.shape[ay], out_h))


def upsample_bilinear(sv: SaliencyVolume, k: int) -> SaliencyVolume:
    if int(k) != k or k < 1:
        raise ValidationError(f"upsampling factor must be an integer >= 1, got {k}")
    s = as_array(sv)
    _, h, w = s.shape
    out = resize_bilinear(s, k * h, k * w, axes=(1, 2))
    stage = Stage.UPSAMPLED if Stage(sv.stage) is not Stage.RAW else Stage.RAW
    return SaliencyVolume(out, stage)


def gaussian_kernel1d(sigma: float) -> np.ndarray:
    """Normalised Gaussian taps on ``[-r, r]`` with ``r = ceil(3 sigma)``."""
    if sigma <= 0:
        return np.ones(1)
    r = math.ceil(3.0 * sigma)
    i = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(i * i) / (2.0 * sigma * sigma))
    return g / g.sum()


def convolve_axis(a: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    """Correlate ``a`` with a symmetric kernel along one axis, replicating edges."""
    r = len(kernel) // 2
    if r == 0:
        return a * kernel[0]
    pad = [(0, 0)] * a.ndim
    pad[axis] = (r, r)
    p = np.pad(a, pad, mode="edge")
    n = a.shape[axis]
    out = np.zeros_like(a, dtype=np.float64)
    for j, g in enumerate(kernel):
        out += g * np.take(p, np.arange(j, j + n), axis=axis)
    return out


def smooth_array(s: np.ndarray, sigma_s: float, sigma_t: float) -> np.ndarray:
    """Separable Gaussian over an ``[L][H][W]`` array: W, then H, then frames."""
    gs = gaussian_kernel1d(sigma_s)
    out = convolve_axis(np.asarray(s, dtype=np.float64), gs, axis=2)
    out = convolve_axis(out, gs, axis=1)
    if sigma_t > 0:
        out = convolve_axis(out, gaussian_kernel1d(sigma_t), axis=0)
    return out


def gaussian_smooth_st(sv: SaliencyVolume, sigma_s: float, sigma_t: float) -> SaliencyVolume:
    if not sigma_s > 0 or sigma_t < 0:
        raise ValidationError(f"need sigma_s > 0 and sigma_t >= 0, got {sigma_s}, {sigma_t}")
    if Stage(sv.stage) not in (Stage.NORMALIZED, Stage.UPSAMPLED):
        raise ValidationError(f"smoothing expects a normalized volume, got stage {sv.stage}")
    out = smooth_array(as_array(sv), sigma_s, sigma_t)
    # inputs lie in [0, 1]; clip rounding overshoot of the convex combination
    return SaliencyVolume(np.clip(out, 0.0, 1.0), Stage.SMOOTHED)


def probability_normalize(sv: SaliencyVolume) -> SaliencyVolume:
    s = as_array(sv).astype(np.float64)
    if s.min() < 0:
        raise ValidationError("probability normalization needs non-negative saliency")
    total = s.sum(axis=(1, 2), keepdims=True)
    empty = total == 0
    out = s / np.where(empty, 1.0, total)
    h, w = s.shape[1:]
    out[np.broadcast_to(empty, out.shape)] = 1.0 / (h * w)
    return SaliencyVolume(out, Stage.PROBABILITY)


def build_saliency(fv: FeatureVolume, cfg: SaliencyConfig = SaliencyConfig()) -> SaliencyVolume:
    """Run the full feature-to-probability saliency pipeline on one clip."""
    s = minmax_normalize(channel_average(fv), cfg.epsilon)
    s = upsample_bilinear(s, cfg.upsample_k)
    s = gaussian_smooth_st(s, cfg.sigma_spatial, cfg.sigma_temporal)
    return probability_normalize(s)
