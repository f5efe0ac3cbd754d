"""Temporal post-processing of location series and tracking-box emission.

Three steps run per axis on a centroid timeline: hold-last-value gap
filling, short-spike removal, and centered moving-average smoothing.
A fixed-size tracking box is then placed on the smoothed positions.

Series are 1-D float arrays with NaN marking absent frames. After gap
filling a series is dense from its first detection to the end; frames
before the first detection stay NaN.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import BBox, Episode, ObjectClass, PipelineConfig
from .locate import LocationSeries, locate_series


@dataclass
class TrackTimeline:
    """Per-frame fixed-size tracking box for one class (None = absent)."""

    cls: ObjectClass
    boxes: list[Optional[BBox]]

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass
class TrackingStages:
    """All intermediate signals of one tracked class, for inspection."""

    cls: ObjectClass
    raw: LocationSeries
    filled: LocationSeries
    despiked: LocationSeries
    smoothed: LocationSeries
    timeline: TrackTimeline


def _defined_start(values: np.ndarray) -> int:
    """Index of the first non-NaN sample, or len(values) if none."""
    present = np.nonzero(~np.isnan(values))[0]
    return int(present[0]) if len(present) else len(values)


def fill_gaps(values: np.ndarray) -> np.ndarray:
    """Replace each NaN after the first present sample with the last seen value.

    Leading NaNs (before any detection) are preserved.
    """
    out = np.asarray(values, dtype=np.float64).copy()
    present = ~np.isnan(out)
    if not present.any():
        return out
    idx = np.where(present, np.arange(len(out)), -1)
    np.maximum.accumulate(idx, out=idx)
    filled = idx >= 0
    out[filled] = out[idx[filled]]
    return out


def remove_short_peaks(
    values: np.ndarray,
    t_peak: float,
    t_stable: float,
    lookahead: int,
) -> np.ndarray:
    """Flatten jumps that revert to baseline within a few frames.

    A sample differing from its predecessor by more than t_peak starts a
    candidate spike. If any of the next `lookahead` samples comes back
    within t_stable of the pre-jump value, everything up to (and not
    including) that first returning sample is reset to the pre-jump
    value. Without such a return the jump is kept as a genuine move.
    The scan runs left to right over the already-corrected signal.
    """
    out = np.asarray(values, dtype=np.float64).copy()
    start = _defined_start(out)
    n = len(out)
    i = start + 1
    while i < n:
        if abs(out[i] - out[i - 1]) > t_peak:
            base = out[i - 1]
            for j in range(i + 1, min(i + lookahead, n - 1) + 1):
                if abs(out[j] - base) < t_stable:
                    out[i:j] = base
                    break
        i += 1
    return out


def smooth(values: np.ndarray, window_param: int) -> np.ndarray:
    """Centered moving average over the defined range of the series.

    The window spans i - window_param//2 .. i + window_param//2 and is
    normalized by the number of samples actually available, so the ends
    of the series get true (shrunk-window) means and constants pass
    through unchanged.
    """
    if window_param < 1:
        raise ValueError("window parameter must be >= 1")
    out = np.asarray(values, dtype=np.float64).copy()
    start = _defined_start(out)
    seg = out[start:]
    n = len(seg)
    if n == 0:
        return out
    half = window_param // 2
    cumsum = np.concatenate(([0.0], np.cumsum(seg)))
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half, n - 1)
    out[start:] = (cumsum[hi + 1] - cumsum[lo]) / (hi + 1 - lo)
    return out


def make_track_boxes(
    xs: np.ndarray,
    ys: np.ndarray,
    cfg: PipelineConfig,
    frame_width: int,
    frame_height: int,
) -> list[Optional[BBox]]:
    """Place a fixed-size box around each defined position.

    Boxes are shifted to stay inside the frame; a frame dimension smaller
    than the box side is covered entirely.
    """
    size = cfg.track_box_size
    boxes: list[Optional[BBox]] = []
    for x, y in zip(xs, ys):
        if np.isnan(x) or np.isnan(y):
            boxes.append(None)
            continue
        if frame_width >= size:
            left = min(max(0.0, x - size / 2.0), frame_width - size)
            w = size
        else:
            left, w = 0.0, float(frame_width)
        if frame_height >= size:
            top = min(max(0.0, y - size / 2.0), frame_height - size)
            h = size
        else:
            top, h = 0.0, float(frame_height)
        boxes.append(BBox(left, top, w, h))
    return boxes


def postprocess_series(raw: LocationSeries, cfg: PipelineConfig) -> tuple[LocationSeries, LocationSeries, LocationSeries]:
    """Run gap filling, spike removal and smoothing on both axes."""
    filled = LocationSeries(raw.cls, fill_gaps(raw.x), fill_gaps(raw.y))
    despiked = LocationSeries(
        raw.cls,
        remove_short_peaks(filled.x, cfg.t_peak, cfg.t_stable, cfg.peak_lookahead),
        remove_short_peaks(filled.y, cfg.t_peak, cfg.t_stable, cfg.peak_lookahead),
    )
    smoothed = LocationSeries(
        raw.cls,
        smooth(despiked.x, cfg.n_f1),
        smooth(despiked.y, cfg.n_f1),
    )
    return filled, despiked, smoothed


def track_object_stages(episode: Episode, cls: ObjectClass, cfg: PipelineConfig) -> TrackingStages:
    """Full tracking chain for one class, keeping every intermediate."""
    raw = locate_series(episode, cls, cfg)
    filled, despiked, smoothed = postprocess_series(raw, cfg)
    boxes = make_track_boxes(
        smoothed.x, smoothed.y, cfg, episode.frame_width, episode.frame_height)
    return TrackingStages(cls, raw, filled, despiked, smoothed, TrackTimeline(cls, boxes))


def track_object(episode: Episode, cls: ObjectClass, cfg: PipelineConfig) -> TrackTimeline:
    """Tracking-box timeline for one class of an episode."""
    return track_object_stages(episode, cls, cfg).timeline
