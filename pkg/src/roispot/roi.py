"""Per-frame region-of-interest selection on probability saliency maps."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .core import (
    FrameGeometry,
    SaliencyVolume,
    Stage,
    ValidationError,
    as_array,
    round_half_up,
)
from .io import EventFormatError
from .saliency import _lerp_axis, resample_coords

# total mass is reduced by this much before comparing against tau, so tau = 1
# is reachable despite rounding in the frame sum
MASS_SLACK = 1e-9
# window masses closer than this to the per-size maximum count as ties
TIE_ATOL = 1e-12


@dataclass(frozen=True)
class RoiConfig:
    tau: float = 0.25
    min_w: int = 112
    min_h: int = 112
    scale_step: int = 1

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValidationError(f"tau must lie in [0, 1], got {self.tau}")
        if self.min_w < 1 or self.min_h < 1:
            raise ValidationError("minimum RoI size must be at least 1x1")
        if self.scale_step < 1:
            raise ValidationError("scale_step must be >= 1")

    @property
    def aspect(self) -> float:
        return self.min_w / self.min_h


@dataclass(frozen=True)
class GridRect:
    x: int
    y: int
    w: int
    h: int
    frame: int = 0

    @property
    def area(self) -> int:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return self.x + self.w / 2, self.y + self.h / 2

    def as_tuple(self) -> tuple[int, int, int, int]:
        return self.x, self.y, self.w, self.h


# pixel-space rectangles share the grid representation
Roi = GridRect


@dataclass(frozen=True)
class RoiTrack:
    geometry: FrameGeometry
    rois: tuple

    def __post_init__(self):
        rois = tuple(self.rois)
        g = self.geometry
        for i, r in enumerate(rois):
            if r.frame != i:
                raise ValidationError(f"RoI {i} is tagged with frame {r.frame}")
            if r.w < 1 or r.h < 1 or r.x < 0 or r.y < 0 or r.x + r.w > g.high_w or r.y + r.h > g.high_h:
                raise ValidationError(f"RoI {r} leaves the {g.high_w}x{g.high_h} frame")
        object.__setattr__(self, "rois", rois)

    def __len__(self) -> int:
        return len(self.rois)


def integral_image(frame_map) -> np.ndarray:
    """Summed-area table with a zero first row and column, shape ``(H+1, W+1)``."""
    m = np.asarray(frame_map, dtype=np.float64)
    sat = np.zeros((m.shape[0] + 1, m.shape[1] + 1))
    sat[1:, 1:] = m.cumsum(axis=0).cumsum(axis=1)
    return sat


def rect_mass(sat: np.ndarray, x: int, y: int, w: int, h: int) -> float:
    return float(sat[y + h, x + w] - sat[y, x + w] - sat[y + h, x] + sat[y, x])


def window_masses(sat: np.ndarray, w: int, h: int) -> np.ndarray:
    """Mass of every ``w x h`` window, indexed ``[y, x]`` by top-left corner."""
    return sat[h:, w:] - sat[:-h, w:] - sat[h:, :-w] + sat[:-h, :-w]


def candidate_sizes(grid_w, grid_h, w0, h0, aspect, scale_step=1):
    """Admissible window sizes in increasing area.

    The first size is the minimum ``(w0, h0)``; after that width grows by
    ``scale_step`` and height follows the aspect ratio, never dropping below
    ``h0``. Enumeration stops at the first size that no longer fits.
    """
    sizes = []
    w, h = w0, h0
    while w <= grid_w and h <= grid_h:
        sizes.append((w, h))
        w += scale_step
        h = max(h0, round_half_up(w / aspect))
    return sizes


def largest_aspect_rect(grid_w, grid_h, w0, h0, aspect) -> GridRect:
    """Largest aspect-correct rectangle that fits the grid, centred."""
    for w in range(grid_w, w0 - 1, -1):
        h = max(h0, round_half_up(w / aspect))
        if h <= grid_h:
            return GridRect((grid_w - w) // 2, (grid_h - h) // 2, w, h)
    return GridRect((grid_w - w0) // 2, (grid_h - h0) // 2, w0, h0)


def best_position(masses: np.ndarray) -> tuple[int, int, float]:
    """Earliest row-major position among windows tied for the maximum mass."""
    top = masses.max()
    y, x = np.argwhere(masses >= top - TIE_ATOL)[0]
    return int(x), int(y), float(top)


def min_mass_rect(frame_map, tau: float, min_size: tuple[int, int], aspect: float = 1.0,
                  scale_step: int = 1) -> GridRect:
    """Smallest admissible window whose mass reaches ``tau``.

    Sizes are scanned in increasing area; for each, the best window is found
    through the summed-area table and accepted once its mass is at least
    ``min(tau, total - 1e-9)``. If no size qualifies the largest centred
    aspect-correct rectangle is returned.
    """
    m = np.asarray(frame_map, dtype=np.float64)
    grid_h, grid_w = m.shape
    w0, h0 = min_size
    if w0 < 1 or h0 < 1 or w0 > grid_w or h0 > grid_h:
        raise ValidationError(f"minimum size {w0}x{h0} does not fit a {grid_w}x{grid_h} grid")
    sat = integral_image(m)
    need = min(tau, sat[-1, -1] - MASS_SLACK)
    for w, h in candidate_sizes(grid_w, grid_h, w0, h0, aspect, scale_step):
        x, y, mass = best_position(window_masses(sat, w, h))
        if mass >= need:
            return GridRect(x, y, w, h)
    return largest_aspect_rect(grid_w, grid_h, w0, h0, aspect)


def _scale(v: int, num: int, den: int) -> int:
    # round_half_up(v * num / den) in exact integer arithmetic
    return (2 * v * num + den) // (2 * den)


def grid_to_frame(rect: GridRect, grid_size: tuple[int, int], geom: FrameGeometry) -> GridRect:
    """Map a grid rectangle to high-resolution pixels, shifting it back inside the frame."""
    gw, gh = grid_size
    w = min(_scale(rect.w, geom.high_w, gw), geom.high_w)
    h = min(_scale(rect.h, geom.high_h, gh), geom.high_h)
    x = min(max(_scale(rect.x, geom.high_w, gw), 0), geom.high_w - w)
    y = min(max(_scale(rect.y, geom.high_h, gh), 0), geom.high_h - h)
    return GridRect(x, y, w, h, rect.frame)


def grid_min_size(cfg: RoiConfig, grid_size: tuple[int, int], geom: FrameGeometry) -> tuple[int, int]:
    """Smallest grid window that maps to at least the minimum pixel size."""
    gw, gh = grid_size
    w0 = min(gw, -(-min(cfg.min_w, geom.high_w) * gw // geom.high_w))
    h0 = min(gh, -(-min(cfg.min_h, geom.high_h) * gh // geom.high_h))
    return max(w0, 1), max(h0, 1)


def grid_aspect(cfg: RoiConfig, grid_size: tuple[int, int], geom: FrameGeometry) -> float:
    """Aspect ratio in grid cells that gives the configured aspect in pixels."""
    gw, gh = grid_size
    return cfg.aspect * (geom.high_h / gh) / (geom.high_w / gw)


def select_roi_frame(frame_map, cfg: RoiConfig, geom: FrameGeometry, frame: int = 0) -> GridRect:
    m = np.asarray(frame_map)
    grid = (m.shape[1], m.shape[0])
    rect = min_mass_rect(m, cfg.tau, grid_min_size(cfg, grid, geom),
                         grid_aspect(cfg, grid, geom), cfg.scale_step)
    roi = grid_to_frame(rect, grid, geom)
    return GridRect(roi.x, roi.y, roi.w, roi.h, frame)


def select_rois(sv: SaliencyVolume, cfg: RoiConfig, geom: FrameGeometry, threads: int = 1) -> RoiTrack:
    """One RoI per frame of a probability-stage saliency volume."""
    if Stage(sv.stage) is not Stage.PROBABILITY:
        raise ValidationError(f"RoI selection needs probability saliency, got stage {sv.stage}")
    s = as_array(sv)

    def one(l):
        return select_roi_frame(s[l], cfg, geom, l)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            rois = list(pool.map(one, range(s.shape[0])))
    else:
        rois = [one(l) for l in range(s.shape[0])]
    return RoiTrack(geom, tuple(rois))


def crop_resize(frame, roi: GridRect, out_size: tuple[int, int]) -> np.ndarray:
    """Bilinearly resample the RoI of an ``H x W x C`` frame to ``out_size = (W_r, H_r)``.

    Sampling stays inside the RoI; a RoI that already has the output size is
    copied bit-exactly.
    """
    img = np.asarray(frame)
    fh, fw = img.shape[:2]
    if roi.x < 0 or roi.y < 0 or roi.w < 1 or roi.h < 1 or roi.x + roi.w > fw or roi.y + roi.h > fh:
        raise ValidationError(f"RoI {roi.as_tuple()} lies outside the {fw}x{fh} frame")
    out_w, out_h = out_size
    patch = img[roi.y:roi.y + roi.h, roi.x:roi.x + roi.w]
    if (roi.w, roi.h) == (out_w, out_h):
        return patch.copy()
    patch = patch.astype(np.float64)
    patch = _lerp_axis(patch, 1, *resample_coords(roi.w, out_w))
    return _lerp_axis(patch, 0, *resample_coords(roi.h, out_h))


def format_roi_track(track: RoiTrack) -> str:
    return "".join(
        json.dumps({"frame": r.frame, "x": r.x, "y": r.y, "w": r.w, "h": r.h}) + "\n"
        for r in track.rois
    )


def write_roi_track(track: RoiTrack, path) -> None:
    Path(path).write_text(format_roi_track(track))


def parse_roi_track(lines: Iterable[str], geom: FrameGeometry) -> RoiTrack:
    rois = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            vals = [rec[k] for k in ("frame", "x", "y", "w", "h")]
        except (json.JSONDecodeError, KeyError, TypeError):
            raise EventFormatError(f"line {lineno}: malformed RoI record") from None
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in vals):
            raise EventFormatError(f"line {lineno}: RoI fields must be integers")
        f, x, y, w, h = vals
        rois.append(GridRect(x, y, w, h, f))
    return RoiTrack(geom, tuple(rois))


def read_roi_track(path, geom: FrameGeometry) -> RoiTrack:
    with open(path) as fh:
        return parse_roi_track(fh, geom)
