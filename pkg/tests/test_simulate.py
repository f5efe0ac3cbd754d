import json
import math

import numpy as np
import pytest

from resustrack.core import ObjectClass, PipelineConfig
from resustrack.locate import locate_series
from resustrack.simulate import (
    NoiseModel,
    ObjectScript,
    PathSegment,
    Scenario,
    generate_episode,
    load_scenario,
    reference_annotation,
    true_boxes,
)


def static_scenario(frames=50, noise=NoiseModel(), providers=((0, 50, 1),),
                    center=(300.0, 300.0), seed=5):
    return Scenario(
        name="static", frames=frames, width=1280, height=1024, seed=seed,
        objects=(ObjectScript(
            ObjectClass.BMR, 80, 60, 0.9,
            segments=(PathSegment(0, frames, center, center),),
            activities=((5, min(30, frames)),)),),
        providers=providers,
        noise=noise,
    )


class TestGeneration:
    def test_noiseless_static_emits_exact_boxes(self):
        scenario = static_scenario(frames=20, providers=())
        episode, _ = generate_episode(scenario)
        assert episode.n_frames == 20
        for frame in episode.frames:
            bmr = [d for d in frame.detections if d.cls == ObjectClass.BMR]
            assert len(bmr) == 1
            box = bmr[0].box
            assert (box.x, box.y, box.w, box.h) == (260.0, 270.0, 80.0, 60.0)

    def test_noiseless_centroid_recovered_exactly(self):
        scenario = static_scenario(frames=10, providers=())
        episode, _ = generate_episode(scenario)
        series = locate_series(episode, ObjectClass.BMR, PipelineConfig())
        # integer 80x60 box at (260, 270): pixel index means are center - 0.5
        assert np.all(series.x == 299.5)
        assert np.all(series.y == 299.5)

    def test_hands_match_provider_script(self):
        scenario = static_scenario(frames=30, providers=((0, 30, 2),))
        episode, _ = generate_episode(scenario)
        for frame in episode.frames:
            hands = [d for d in frame.detections if d.cls == ObjectClass.HCPH]
            assert len(hands) == 4  # two hands per provider

    def test_dropout_fraction_within_binomial_bound(self):
        n = 10_000
        p = 0.2
        scenario = static_scenario(frames=n, providers=(),
                                   noise=NoiseModel(dropout=p))
        episode, _ = generate_episode(scenario)
        present = sum(
            1 for f in episode.frames
            if any(d.cls == ObjectClass.BMR for d in f.detections))
        expected = (1 - p) * n
        sigma = math.sqrt(n * p * (1 - p))
        assert abs(present - expected) <= 3 * sigma

    def test_fixed_seed_reproducible(self):
        noise = NoiseModel(dropout=0.3, false_positives_per_frame=0.5,
                           jitter_std=2.0, score_range=(0.5, 1.0))
        a, _ = generate_episode(static_scenario(noise=noise))
        b, _ = generate_episode(static_scenario(noise=noise))
        assert a == b

    def test_spike_frames_displace_detection(self):
        noise = NoiseModel(spike_every=10, spike_len=2, spike_offset=(300.0, 0.0))
        episode, _ = generate_episode(static_scenario(frames=25, providers=(),
                                                      noise=noise))
        def bmr_x(i):
            return [d.box.x for d in episode.frames[i].detections
                    if d.cls == ObjectClass.BMR][0]
        assert bmr_x(9) == 260.0
        assert bmr_x(10) == 560.0
        assert bmr_x(11) == 560.0
        assert bmr_x(12) == 260.0
        assert bmr_x(20) == 560.0


class TestGroundTruth:
    def test_annotation_reflects_scripts(self):
        scenario = static_scenario(frames=50, providers=((0, 20, 1), (20, 50, 2)))
        ann = reference_annotation(scenario)
        nhcp = ann.nhcp_timeline(50)
        assert nhcp[0] == 1 and nhcp[19] == 1 and nhcp[20] == 2 and nhcp[49] == 2
        assert ann.visible[ObjectClass.BMR] == [(0, 50)]
        assert ann.activities[ObjectClass.BMR] == [(5, 30)]

    def test_noise_does_not_touch_annotation(self):
        clean = reference_annotation(static_scenario())
        noisy_scenario = static_scenario(
            noise=NoiseModel(dropout=0.5, false_positives_per_frame=2.0,
                             jitter_std=10.0))
        _, noisy = generate_episode(noisy_scenario)
        assert noisy == clean

    def test_true_boxes_follow_linear_path(self):
        scenario = Scenario(
            name="lin", frames=11, width=640, height=480, seed=1,
            objects=(ObjectScript(
                ObjectClass.SP, 40, 40, 0.9,
                segments=(PathSegment(0, 11, (100.0, 100.0), (200.0, 100.0)),)),),
        )
        boxes = true_boxes(scenario)[ObjectClass.SP]
        assert boxes[0].x == 80.0
        assert boxes[10].x == 180.0
        assert boxes[5].x == 130.0  # halfway

    def test_gap_frames_have_no_boxes(self):
        scenario = Scenario(
            name="gap", frames=30, width=640, height=480,
            objects=(ObjectScript(
                ObjectClass.HRS, 30, 30, 0.9,
                segments=(PathSegment(0, 10, (100.0, 100.0), (100.0, 100.0)),
                          PathSegment(20, 30, (150.0, 150.0), (150.0, 150.0)))),),
        )
        boxes = true_boxes(scenario)[ObjectClass.HRS]
        assert all(b is not None for b in boxes[:10])
        assert all(b is None for b in boxes[10:20])
        assert all(b is not None for b in boxes[20:])
        ann = reference_annotation(scenario)
        assert ann.visible[ObjectClass.HRS] == [(0, 10), (20, 30)]


class TestValidation:
    def test_out_of_frame_trajectory_rejected(self):
        with pytest.raises(ValueError, match="leaves the frame"):
            Scenario(
                name="bad", frames=10, width=100, height=100,
                objects=(ObjectScript(
                    ObjectClass.BMR, 80, 60,
                    segments=(PathSegment(0, 10, (10.0, 50.0), (10.0, 50.0)),)),))

    def test_duplicate_class_rejected(self):
        seg = (PathSegment(0, 5, (50.0, 50.0), (50.0, 50.0)),)
        with pytest.raises(ValueError, match="duplicate"):
            Scenario(
                name="bad", frames=5, width=100, height=100,
                objects=(ObjectScript(ObjectClass.BMR, 10, 10, segments=seg),
                         ObjectScript(ObjectClass.BMR, 10, 10, segments=seg)))

    def test_hand_scripts_rejected(self):
        with pytest.raises(ValueError, match="cannot script"):
            Scenario(
                name="bad", frames=5, width=100, height=100,
                objects=(ObjectScript(ObjectClass.HCPH, 10, 10),))


class TestScenarioFiles:
    def test_json_round_trip(self):
        text = json.dumps({
            "name": "demo", "frames": 40, "width": 640, "height": 480,
            "seed": 3,
            "objects": [{
                "class": "BMR", "width": 60, "height": 40, "score": 0.8,
                "segments": [
                    {"start": 0, "end": 20, "from": [100, 100], "to": [200, 150]},
                    {"start": 25, "end": 40, "from": [220, 160]},
                ],
                "activities": [{"start": 5, "end": 15}],
            }],
            "providers": [[0, 40, 1]],
            "noise": {"dropout": 0.1, "score_range": [0.6, 0.9]},
        })
        scenario = load_scenario(text)
        assert scenario.name == "demo"
        assert scenario.objects[0].cls == ObjectClass.BMR
        assert scenario.objects[0].segments[1].target == (220, 160)
        assert scenario.noise.dropout == 0.1
        episode, ann = generate_episode(scenario)
        assert episode.n_frames == 40
        assert ann.activities[ObjectClass.BMR] == [(5, 15)]
