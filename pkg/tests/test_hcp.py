import numpy as np

from resustrack.core import (
    BBox,
    Detection,
    Episode,
    FrameDetections,
    ObjectClass,
    PipelineConfig,
)
from resustrack.hcp import count_hands, hcp_timeline, quantize_hcp, smooth_counts


def hand(score, x=10, y=10):
    return Detection(ObjectClass.HCPH, BBox(x, y, 20, 20), score)


def episode_with_hands(per_frame_counts, width=640, height=480, score=0.9):
    frames = []
    for i, n in enumerate(per_frame_counts):
        frames.append(FrameDetections(i, [hand(score, x=30 * k) for k in range(n)]))
    return Episode("ep", width, height, frames)


class TestCountHands:
    def test_empty_frame(self):
        assert count_hands(FrameDetections(0, []), 0.1) == 0

    def test_score_gate_is_strict(self):
        frame = FrameDetections(0, [hand(0.2), hand(0.15, x=40), hand(0.05, x=70)])
        assert count_hands(frame, 0.1) == 2
        assert count_hands(FrameDetections(0, [hand(0.1)]), 0.1) == 0

    def test_other_classes_ignored(self):
        dets = [Detection(ObjectClass.BMR, BBox(0, 0, 10, 10), 0.9)] * 3
        assert count_hands(FrameDetections(0, dets), 0.1) == 0


class TestSmoothCounts:
    def test_constant(self):
        out = smooth_counts(np.full(10, 2), 40)
        assert np.array_equal(out, np.full(10, 2.0))

    def test_alternating_interior_near_one(self):
        counts = np.tile([0, 2], 100)
        out = smooth_counts(counts, 40)
        interior = out[25:-25]
        assert np.all(np.abs(interior - 1.0) <= 0.05)

    def test_single_frame_unchanged(self):
        assert np.array_equal(smooth_counts(np.array([3]), 40), np.array([3.0]))


class TestQuantize:
    CFG = PipelineConfig()

    def q(self, value):
        return int(quantize_hcp(np.array([value]), 0.2, 2.0, 4.0)[0])

    def test_band_edges_inclusive_below(self):
        assert self.q(0.2) == 0
        assert self.q(2.0) == 1
        assert self.q(4.0) == 2

    def test_bands(self):
        assert self.q(0.0) == 0
        assert self.q(0.21) == 1
        assert self.q(3.0) == 2
        assert self.q(4.5) == 3

    def test_monotone_in_input(self):
        rng = np.random.default_rng(31)
        values = np.sort(rng.uniform(0, 8, 500))
        out = quantize_hcp(values, 0.2, 2.0, 4.0)
        assert np.all(np.diff(out) >= 0)


class TestTimeline:
    def test_all_zero(self):
        timeline = hcp_timeline(episode_with_hands([0] * 30), PipelineConfig())
        assert np.array_equal(timeline.providers, np.zeros(30, dtype=np.int64))

    def test_two_hands_maps_to_one_provider(self):
        timeline = hcp_timeline(episode_with_hands([2] * 50), PipelineConfig())
        assert np.array_equal(timeline.smoothed, np.full(50, 2.0))
        assert np.array_equal(timeline.providers, np.ones(50, dtype=np.int64))

    def test_four_hands_maps_to_two_providers(self):
        timeline = hcp_timeline(episode_with_hands([4] * 50), PipelineConfig())
        assert np.array_equal(timeline.providers, np.full(50, 2, dtype=np.int64))

    def test_six_hands_maps_to_three_providers(self):
        timeline = hcp_timeline(episode_with_hands([6] * 50), PipelineConfig())
        assert np.array_equal(timeline.providers, np.full(50, 3, dtype=np.int64))

    def test_invariant_to_non_hand_detections(self):
        rng = np.random.default_rng(32)
        counts = [int(rng.integers(0, 5)) for _ in range(60)]
        base = episode_with_hands(counts)
        noisy_frames = []
        for frame in base.frames:
            extra = [
                Detection(ObjectClass(int(rng.integers(1, 4))),
                          BBox(float(rng.uniform(0, 600)), float(rng.uniform(0, 440)),
                               20, 20),
                          float(rng.uniform()))
                for _ in range(int(rng.integers(0, 4)))
            ]
            noisy_frames.append(FrameDetections(frame.frame_index,
                                                list(frame.detections) + extra))
        noisy = Episode("ep", 640, 480, noisy_frames)
        a = hcp_timeline(base, PipelineConfig())
        b = hcp_timeline(noisy, PipelineConfig())
        assert np.array_equal(a.counts, b.counts)
        assert np.array_equal(a.providers, b.providers)

    def test_smoothing_bounded_by_peak_count(self):
        rng = np.random.default_rng(33)
        counts = [int(rng.integers(0, 7)) for _ in range(200)]
        timeline = hcp_timeline(episode_with_hands(counts), PipelineConfig())
        assert timeline.smoothed.min() >= 0
        assert timeline.smoothed.max() <= max(counts)

    def test_intermediates_have_episode_length(self):
        timeline = hcp_timeline(episode_with_hands([1, 2, 3]), PipelineConfig())
        assert len(timeline.counts) == len(timeline.smoothed) == len(timeline) == 3
