"""Per-frame provider-count estimation from hand detections.

Hands above a score gate are counted per frame, the count signal is
smoothed with the same centered moving average used for positions, and
the smoothed value is quantized into the bands 0, 1, 2, 3+ providers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Episode, FrameDetections, ObjectClass, PipelineConfig
from .trackpost import smooth


@dataclass
class HcpTimeline:
    """Provider-count timeline with its intermediate signals.

    counts is the raw per-frame hand count, smoothed its moving average,
    and providers the quantized number of providers in {0, 1, 2, 3}.
    """

    counts: np.ndarray
    smoothed: np.ndarray
    providers: np.ndarray

    def __len__(self) -> int:
        return len(self.providers)


def count_hands(frame: FrameDetections, t_hcph: float) -> int:
    """Number of hand detections scoring strictly above t_hcph."""
    return sum(
        1 for d in frame.detections
        if d.cls == ObjectClass.HCPH and d.score > t_hcph
    )


def smooth_counts(counts: np.ndarray, window_param: int) -> np.ndarray:
    """Centered true-mean moving average of a dense count series."""
    return smooth(np.asarray(counts, dtype=np.float64), window_param)


def quantize_hcp(smoothed: np.ndarray, t_zero: float, t_one: float, t_two: float) -> np.ndarray:
    """Map smoothed hand counts onto provider counts.

    Band edges are inclusive on the left band: values at exactly t_zero,
    t_one or t_two fall into the lower band.
    """
    values = np.asarray(smoothed, dtype=np.float64)
    out = np.zeros(values.shape, dtype=np.int64)
    out[values > t_zero] = 1
    out[values > t_one] = 2
    out[values > t_two] = 3
    return out


def hcp_timeline(episode: Episode, cfg: PipelineConfig) -> HcpTimeline:
    """Count, smooth and quantize hand detections over an episode."""
    counts = np.array(
        [count_hands(f, cfg.t_hcph) for f in episode.frames], dtype=np.int64)
    smoothed = smooth_counts(counts, cfg.n_f2)
    providers = quantize_hcp(smoothed, cfg.t_zero, cfg.t_one, cfg.t_two)
    return HcpTimeline(counts, smoothed, providers)
