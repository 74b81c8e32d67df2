"""Deterministic synthetic scenes and brute-force oracles.

Scenes contain one Gaussian blob moving over the feature grid. A subset of
channels carries the blob; the rest carry uniform noise drawn from a
SplitMix64 stream, so fixtures are reproducible in any language.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import Event, EventSet, FeatureVolume, ScoreSequence, ValidationError, round_half_up
from .roi import GridRect

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator with vectorised draws.

    Each draw advances ``state`` by the golden-ratio increment and mixes it;
    ``uniform`` maps the top 53 bits of each output to ``[0, 1)``.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self, n: int) -> np.ndarray:
        steps = np.arange(1, n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + steps * np.uint64(GOLDEN_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * GOLDEN_GAMMA) & _MASK64
        return z

    def uniform(self, n: int) -> np.ndarray:
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    frames: int = 32
    height: int = 14
    width: int = 14
    channels: int = 8
    blob_sigma: float = 1.0
    trajectory: str = "static"
    velocity: tuple = (0.0, 0.0)
    start: Optional[tuple] = None
    bounds_y: Optional[tuple] = None
    bounds_x: Optional[tuple] = None
    noise: float = 0.0
    active_fraction: float = 0.5

    def __post_init__(self):
        if self.frames < 1 or self.height < 1 or self.width < 1 or self.channels < 1:
            raise ValidationError("frames, grid and channels must be >= 1")
        if self.trajectory not in ("static", "linear", "bounce"):
            raise ValidationError(f"unknown trajectory {self.trajectory!r}")
        if not self.blob_sigma > 0 or self.noise < 0:
            raise ValidationError("blob_sigma must be > 0 and noise >= 0")
        if not 0 < self.active_fraction <= 1:
            raise ValidationError("active_fraction must lie in (0, 1]")
        for name in ("velocity", "start", "bounds_y", "bounds_x"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, tuple(float(x) for x in v))
        for (lo, hi), n in ((self.range_y, self.height), (self.range_x, self.width)):
            if not 0 <= lo <= hi <= n - 1:
                raise ValidationError(f"bounce range ({lo}, {hi}) does not fit an axis of {n} cells")
        y0, x0 = self.origin
        if not (0 <= y0 <= self.height - 1 and 0 <= x0 <= self.width - 1):
            raise ValidationError(f"blob start {self.origin} lies outside the grid")

    @property
    def origin(self) -> tuple:
        if self.start is not None:
            return self.start
        return (self.height - 1) / 2, (self.width - 1) / 2

    @property
    def range_y(self) -> tuple:
        return self.bounds_y if self.bounds_y is not None else (0.0, self.height - 1.0)

    @property
    def range_x(self) -> tuple:
        return self.bounds_x if self.bounds_x is not None else (0.0, self.width - 1.0)


@dataclass(frozen=True)
class GroundTruth:
    centers: np.ndarray   # [L][2] blob centre (y, x), cell-centre coordinates
    boxes: np.ndarray     # [L][4] (x, y, w, h), cell-edge coordinates
    events: EventSet

    def to_json(self) -> dict:
        return {
            "centers": self.centers.tolist(),
            "boxes": self.boxes.tolist(),
            "events": [{"frame": e.frame, "class": "bounce"} for e in self.events],
        }


def _reflect(q: np.ndarray, lo: float, hi: float) -> np.ndarray:
    span = hi - lo
    if span == 0:
        return np.full_like(q, lo)
    u = np.mod(q - lo, 2 * span)
    return lo + np.where(u <= span, u, 2 * span - u)


def _reversal_times(p0, v, lo, hi, last):
    """Times in ``(0, last]`` at which a reflected 1-D trajectory turns around."""
    span = hi - lo
    if v == 0 or span == 0:
        return []
    out = []
    m = math.floor((p0 - lo) / span) + (1 if v > 0 else 0)
    step = 1 if v > 0 else -1
    while True:
        t = (lo + m * span - p0) / v
        if t > last:
            break
        if t > 0:
            out.append(t)
        m += step
    return out


def trajectory(cfg: SynthConfig) -> np.ndarray:
    """Blob centre ``(y, x)`` for every frame."""
    t = np.arange(cfg.frames, dtype=np.float64)
    (y0, x0), (vy, vx) = cfg.origin, cfg.velocity
    if cfg.trajectory == "static":
        return np.tile([y0, x0], (cfg.frames, 1))
    y, x = y0 + vy * t, x0 + vx * t
    if cfg.trajectory == "linear":
        if y.min() < 0 or x.min() < 0 or y.max() > cfg.height - 1 or x.max() > cfg.width - 1:
            raise ValidationError("linear trajectory leaves the grid")
        return np.stack([y, x], axis=1)
    return np.stack([_reflect(y, *cfg.range_y), _reflect(x, *cfg.range_x)], axis=1)


def reversal_frames(cfg: SynthConfig) -> list[int]:
    if cfg.trajectory != "bounce":
        return []
    (y0, x0), (vy, vx) = cfg.origin, cfg.velocity
    last = cfg.frames - 1
    times = _reversal_times(y0, vy, *cfg.range_y, last) + _reversal_times(x0, vx, *cfg.range_x, last)
    return sorted({min(round_half_up(t), last) for t in times})


def gen_scene(cfg: SynthConfig, video: str = "synth"):
    """Feature volume and ground truth for a synthetic scene."""
    centers = trajectory(cfg)
    yy, xx = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)
    cy, cx = centers[:, 0, None, None], centers[:, 1, None, None]
    bump = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * cfg.blob_sigma**2))

    n_active = min(cfg.channels, max(1, round_half_up(cfg.active_fraction * cfg.channels)))
    data = np.zeros((cfg.frames, cfg.height, cfg.width, cfg.channels))
    data[..., :n_active] = bump[..., None]
    n_noise = cfg.channels - n_active
    if n_noise and cfg.noise > 0:
        rng = SplitMix64(cfg.seed)
        shape = (cfg.frames, cfg.height, cfg.width, n_noise)
        data[..., n_active:] = cfg.noise * rng.uniform(int(np.prod(shape))).reshape(shape)

    half = 2 * cfg.blob_sigma
    x0 = np.clip(centers[:, 1] + 0.5 - half, 0, cfg.width)
    x1 = np.clip(centers[:, 1] + 0.5 + half, 0, cfg.width)
    y0 = np.clip(centers[:, 0] + 0.5 - half, 0, cfg.height)
    y1 = np.clip(centers[:, 0] + 0.5 + half, 0, cfg.height)
    boxes = np.stack([x0, y0, x1 - x0, y1 - y0], axis=1)

    events = EventSet(video, tuple(Event(1, t) for t in reversal_frames(cfg)),
                      num_frames=cfg.frames, num_classes=1)
    return FeatureVolume(data), GroundTruth(centers, boxes, events)


def ideal_scores(events: EventSet, length: int, num_classes: int = 1, spread: float = 1.0) -> ScoreSequence:
    """Probabilities peaking at 1 on every event frame with a Gaussian falloff of ``spread`` frames."""
    t = np.arange(length, dtype=np.float64)
    fg = np.zeros((length, num_classes))
    for ev in events:
        if spread > 0:
            bump = np.exp(-((t - ev.frame) ** 2) / (2 * spread**2))
        else:
            bump = (t == ev.frame).astype(np.float64)
        fg[:, ev.label - 1] = np.maximum(fg[:, ev.label - 1], bump)
    total = fg.sum(axis=1, keepdims=True)
    fg = np.where(total > 1, fg / np.maximum(total, 1), fg)
    bg = np.clip(1.0 - fg.sum(axis=1, keepdims=True), 0.0, 1.0)
    return ScoreSequence(np.hstack([bg, fg]), probabilities=True)


def config_to_json(cfg: SynthConfig) -> dict:
    return asdict(cfg)


def write_ground_truth(gt: GroundTruth, cfg: SynthConfig, path) -> None:
    doc = gt.to_json()
    doc["config"] = config_to_json(cfg)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# oracles


def oracle_min_rect(frame_map, tau: float, min_size, aspect: float = 1.0, scale_step: int = 1) -> GridRect:
    """Exhaustive reference for the minimum-mass rectangle search.

    Every admissible size is listed by filtering all ``(w, h)`` pairs, and
    every window mass is a direct sum over its cells.
    """
    m = np.asarray(frame_map, dtype=np.float64)
    H, W = m.shape
    w0, h0 = min_size

    def allowed_h(w):
        return h0 if w == w0 else max(h0, int(math.floor(w / aspect + 0.5)))

    sizes = [(w, h) for w in range(1, W + 1) for h in range(1, H + 1)
             if w >= w0 and (w - w0) % scale_step == 0 and h == allowed_h(w)]
    sizes.sort(key=lambda s: (s[0] * s[1], s[0]))
    need = min(tau, m.sum() - 1e-9)
    for w, h in sizes:
        masses = sliding_window_view(m, (h, w)).sum(axis=(2, 3))
        top = masses.max()
        for y in range(masses.shape[0]):
            hits = np.nonzero(masses[y] >= top - 1e-12)[0]
            if hits.size:
                break
        if top >= need:
            return GridRect(int(hits[0]), y, w, h)
    # fallback: the full frame clipped to the aspect ratio
    fits = [(w, max(h0, int(math.floor(w / aspect + 0.5)))) for w in range(w0, W + 1)]
    fits = [s for s in fits if s[1] <= H]
    w, h = fits[-1] if fits else (w0, h0)
    return GridRect((W - w) // 2, (H - h) // 2, w, h)


def _taps(sigma: float) -> np.ndarray:
    if sigma <= 0:
        return np.ones(1)
    r = int(math.ceil(3 * sigma))
    g = np.array([math.exp(-(i * i) / (2 * sigma * sigma)) for i in range(-r, r + 1)])
    return g / g.sum()


def oracle_conv3d(volume, sigma_s: float, sigma_t: float) -> np.ndarray:
    """Dense 3-D convolution with the outer-product Gaussian, replicating edges."""
    v = np.asarray(volume, dtype=np.float64)
    L, H, W = v.shape
    gt, gs = _taps(sigma_t), _taps(sigma_s)
    kernel = gt[:, None, None] * gs[None, :, None] * gs[None, None, :]
    rt, rs = len(gt) // 2, len(gs) // 2
    tt, yy, xx = np.meshgrid(np.arange(L), np.arange(H), np.arange(W), indexing="ij")
    out = np.zeros_like(v)
    for dt in range(-rt, rt + 1):
        for dy in range(-rs, rs + 1):
            for dx in range(-rs, rs + 1):
                src = v[np.clip(tt + dt, 0, L - 1), np.clip(yy + dy, 0, H - 1), np.clip(xx + dx, 0, W - 1)]
                out += kernel[dt + rt, dy + rs, dx + rs] * src
    return out


def oracle_opt_match(dets: Sequence, gt: Sequence, delta: int) -> int:
    """Maximum number of class-consistent detection/ground-truth pairs within ``delta``."""
    total = 0
    for c in {e.label for e in dets} & {e.label for e in gt}:
        d = [e.frame for e in dets if e.label == c]
        g = [e.frame for e in gt if e.label == c]

        @lru_cache(maxsize=None)
        def best(i, used):
            if i == len(d):
                return 0
            score = best(i + 1, used)
            for j, f in enumerate(g):
                if not used >> j & 1 and abs(d[i] - f) <= delta:
                    score = max(score, 1 + best(i + 1, used | 1 << j))
            return score

        total += best(0, 0)
    return total


def rect_iou(a, b) -> float:
    """Intersection over union of two ``(x, y, w, h)`` rectangles."""
    ax, ay, aw, ah = a.as_tuple() if hasattr(a, "as_tuple") else a
    bx, by, bw, bh = b.as_tuple() if hasattr(b, "as_tuple") else b
    iw = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    ih = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0
