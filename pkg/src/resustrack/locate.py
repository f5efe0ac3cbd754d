"""Per-frame most-likely object position from accumulated objectness.

For each frame, the detection scores of one class are painted into a
per-pixel accumulator over the box areas. The estimated position is the
centroid of the pixels attaining the accumulator maximum, provided that
maximum exceeds the class threshold.

Pixel convention: a pixel is addressed by its integer index, and a box
[x, x+w) covers pixel column ix iff x <= ix < x+w. Centroids are means
of integer pixel indices, so a single pixel at (3, 4) has centroid (3, 4).

``locate_series`` runs a coordinate-compression implementation that gives
bit-identical results to the dense accumulate/extract pair but avoids
materializing a full-resolution raster per frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    TRACKED_CLASSES,
    Episode,
    FrameDetections,
    ObjectClass,
    PipelineConfig,
)


@dataclass
class ObjectnessField:
    """Per-pixel accumulation of detection scores for one class."""

    values: np.ndarray  # shape (height, width), float64, all >= 0

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


@dataclass
class LocationSeries:
    """Per-frame centroid timeline for one tracked class.

    Absent frames hold NaN in both axes. Both arrays always have the
    episode's frame count.
    """

    cls: ObjectClass
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.shape != self.y.shape:
            raise ValueError("axis arrays must have equal length")

    def __len__(self) -> int:
        return len(self.x)

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.x)


def _pixel_range(lo: float, hi: float, limit: int) -> tuple[int, int]:
    """Integer pixel indices covered by the half-open interval [lo, hi).

    Returns (first, last+1) clipped to [0, limit).
    """
    first = max(0, math.ceil(lo))
    last = min(limit, math.ceil(hi))
    return first, last


def accumulate_objectness(
    frame: FrameDetections,
    cls: ObjectClass,
    width: int,
    height: int,
    downscale: int = 1,
) -> ObjectnessField:
    """Paint the class's detection scores into a per-pixel accumulator.

    Each detection adds its score to every pixel inside its box, clipped
    to the frame. Other classes are ignored. With downscale > 1 the
    raster is coarsened by that integer factor (an approximation used
    only for speed).
    """
    if cls not in TRACKED_CLASSES:
        raise ValueError(f"{cls.name} is not a tracked class")
    if downscale < 1:
        raise ValueError("downscale must be >= 1")
    grid_w = -(-width // downscale)
    grid_h = -(-height // downscale)
    values = np.zeros((grid_h, grid_w), dtype=np.float64)
    for det in frame.detections:
        if det.cls != cls:
            continue
        x0, x1 = _pixel_range(det.box.x / downscale, (det.box.x + det.box.w) / downscale, grid_w)
        y0, y1 = _pixel_range(det.box.y / downscale, (det.box.y + det.box.h) / downscale, grid_h)
        if x0 < x1 and y0 < y1:
            values[y0:y1, x0:x1] += det.score
    return ObjectnessField(values)


def extract_centroid(
    field: ObjectnessField,
    t_obj: float,
    mode: str = "max",
) -> Optional[tuple[float, float]]:
    """Centroid of the accumulator's peak, or None when below threshold.

    mode "max" takes the pixels attaining the global maximum (ties across
    disconnected regions are not broken; the centroid of their union is
    returned). mode "above_threshold" takes every pixel exceeding t_obj.
    In both modes the result is absent iff the maximum is <= t_obj.
    """
    values = field.values
    if values.size == 0:
        return None
    peak = values.max()
    if peak <= t_obj:
        return None
    if mode == "max":
        mask = values == peak
    elif mode == "above_threshold":
        mask = values > t_obj
    else:
        raise ValueError(f"unknown centroid mode {mode!r}")
    ys, xs = np.nonzero(mask)
    count = len(xs)
    return (float(int(xs.sum(dtype=np.int64))) / count,
            float(int(ys.sum(dtype=np.int64))) / count)


def _frame_centroid_sparse(
    frame: FrameDetections,
    cls: ObjectClass,
    width: int,
    height: int,
    t_obj: float,
    mode: str,
    downscale: int,
) -> Optional[tuple[float, float]]:
    """Centroid identical to the dense path, via coordinate compression.

    The accumulator is piecewise constant on the grid induced by the box
    edges, so cells can stand in for pixels. Scores are added per cell in
    detection order, reproducing the dense path's float additions exactly.
    """
    grid_w = -(-width // downscale)
    grid_h = -(-height // downscale)
    spans = []
    for det in frame.detections:
        if det.cls != cls:
            continue
        x0, x1 = _pixel_range(det.box.x / downscale, (det.box.x + det.box.w) / downscale, grid_w)
        y0, y1 = _pixel_range(det.box.y / downscale, (det.box.y + det.box.h) / downscale, grid_h)
        if x0 < x1 and y0 < y1:
            spans.append((x0, x1, y0, y1, det.score))
    if not spans:
        return None

    xs = sorted({v for s in spans for v in (s[0], s[1])})
    ys = sorted({v for s in spans for v in (s[2], s[3])})
    cells = []  # (cx0, cx1, cy0, cy1, value)
    for yi in range(len(ys) - 1):
        cy0, cy1 = ys[yi], ys[yi + 1]
        for xi in range(len(xs) - 1):
            cx0, cx1 = xs[xi], xs[xi + 1]
            value = 0.0
            for x0, x1, y0, y1, score in spans:
                if x0 <= cx0 and cx1 <= x1 and y0 <= cy0 and cy1 <= y1:
                    value += score
            cells.append((cx0, cx1, cy0, cy1, value))

    peak = max(c[4] for c in cells)
    if peak <= t_obj:
        return None
    if mode == "max":
        selected = [c for c in cells if c[4] == peak]
    elif mode == "above_threshold":
        selected = [c for c in cells if c[4] > t_obj]
    else:
        raise ValueError(f"unknown centroid mode {mode!r}")

    sum_x = sum_y = count = 0
    for cx0, cx1, cy0, cy1, _ in selected:
        nx = cx1 - cx0
        ny = cy1 - cy0
        sum_x += (cx0 + cx1 - 1) * nx // 2 * ny
        sum_y += (cy0 + cy1 - 1) * ny // 2 * nx
        count += nx * ny
    return float(sum_x) / count, float(sum_y) / count


def _to_native(point: tuple[float, float], downscale: int) -> tuple[float, float]:
    """Map a coarse-grid centroid back to native pixel indices.

    Coarse pixel p stands for native indices p*k .. p*k+k-1, whose mean
    is p*k + (k-1)/2.
    """
    if downscale == 1:
        return point
    half = (downscale - 1) / 2.0
    return point[0] * downscale + half, point[1] * downscale + half


def locate_series(episode: Episode, cls: ObjectClass, cfg: PipelineConfig) -> LocationSeries:
    """Estimate the class's centroid in every frame of an episode."""
    if cls not in TRACKED_CLASSES:
        raise ValueError(f"{cls.name} is not a tracked class")
    t_obj = cfg.t_obj(cls)
    n = episode.n_frames
    out_x = np.full(n, np.nan)
    out_y = np.full(n, np.nan)
    for i, frame in enumerate(episode.frames):
        point = _frame_centroid_sparse(
            frame, cls, episode.frame_width, episode.frame_height,
            t_obj, cfg.centroid_mode, cfg.downscale,
        )
        if point is not None:
            out_x[i], out_y[i] = _to_native(point, cfg.downscale)
    return LocationSeries(cls, out_x, out_y)


def locate_series_dense(episode: Episode, cls: ObjectClass, cfg: PipelineConfig) -> LocationSeries:
    """Reference composition of accumulate_objectness and extract_centroid.

    Same results as locate_series; kept as the directly-testable dense
    route (it materializes one full raster per frame).
    """
    if cls not in TRACKED_CLASSES:
        raise ValueError(f"{cls.name} is not a tracked class")
    t_obj = cfg.t_obj(cls)
    n = episode.n_frames
    out_x = np.full(n, np.nan)
    out_y = np.full(n, np.nan)
    for i, frame in enumerate(episode.frames):
        field = accumulate_objectness(
            frame, cls, episode.frame_width, episode.frame_height, cfg.downscale)
        point = extract_centroid(field, t_obj, cfg.centroid_mode)
        if point is not None:
            out_x[i], out_y[i] = _to_native(point, cfg.downscale)
    return LocationSeries(cls, out_x, out_y)
