"""Scripted-episode generator with exact ground truth.

A scenario scripts piecewise-linear object trajectories, provider counts
and a noise model, and renders them into a detection stream. The ground
truth (visibility, activity intervals, provider counts) comes straight
from the script, so generated episodes double as oracles for the
tracking pipeline. Noise only perturbs the emitted detections, never
the reference annotation.

Scenario files are JSON, e.g.:

    {"name": "static", "frames": 120, "width": 1280, "height": 1024,
     "seed": 7,
     "objects": [{"class": "BMR", "width": 80, "height": 60, "score": 0.9,
                  "segments": [{"start": 0, "end": 120,
                                "from": [300, 300], "to": [300, 300]}],
                  "activities": [{"start": 20, "end": 80}]}],
     "providers": [{"start": 0, "end": 120, "count": 2}],
     "noise": {"dropout": 0.1}}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    BBox,
    Detection,
    Episode,
    FrameDetections,
    ObjectClass,
    TRACKED_CLASSES,
    serialize_detection_stream,
)
from .metrics import ReferenceAnnotation, format_annotations


@dataclass(frozen=True)
class PathSegment:
    """Linear motion from one center to another over [start, end) frames.

    The object sits at `origin` on the first frame and reaches `target`
    on the segment's last frame; omitting the target keeps it parked.
    """

    start: int
    end: int
    origin: tuple[float, float]
    target: Optional[tuple[float, float]] = None

    def __post_init__(self):
        if self.target is None:
            object.__setattr__(self, "target", self.origin)

    def center_at(self, i: int) -> tuple[float, float]:
        span = self.end - 1 - self.start
        if span <= 0:
            return self.origin
        t = (i - self.start) / span
        return (
            self.origin[0] + t * (self.target[0] - self.origin[0]),
            self.origin[1] + t * (self.target[1] - self.origin[1]),
        )


@dataclass(frozen=True)
class ObjectScript:
    """Trajectory, size and activity intervals of one tracked object."""

    cls: ObjectClass
    width: float
    height: float
    score: float = 0.9
    segments: tuple[PathSegment, ...] = ()
    activities: tuple[tuple[int, int], ...] = ()

    def center_at(self, i: int) -> Optional[tuple[float, float]]:
        for seg in self.segments:
            if seg.start <= i < seg.end:
                return seg.center_at(i)
        return None


@dataclass(frozen=True)
class NoiseModel:
    """Detection-level perturbations applied while rendering a scenario."""

    dropout: float = 0.0
    false_positives_per_frame: float = 0.0
    fp_size: tuple[float, float] = (40.0, 40.0)
    jitter_std: float = 0.0
    score_range: Optional[tuple[float, float]] = None
    spike_every: int = 0       # inject a displaced detection every N frames
    spike_len: int = 2
    spike_offset: tuple[float, float] = (300.0, 0.0)

    def __post_init__(self):
        if not 0.0 <= self.dropout <= 1.0:
            raise ValueError("dropout must be a probability")
        if self.false_positives_per_frame < 0:
            raise ValueError("false-positive rate cannot be negative")

    def is_spike_frame(self, i: int) -> bool:
        if self.spike_every <= 0:
            return False
        return i >= self.spike_every and i % self.spike_every < self.spike_len


@dataclass(frozen=True)
class Scenario:
    """A full scripted episode: geometry, object paths, providers, noise."""

    name: str
    frames: int
    width: int
    height: int
    seed: int = 0
    objects: tuple[ObjectScript, ...] = ()
    providers: tuple[tuple[int, int, int], ...] = ()  # (start, end, count)
    hands_per_provider: int = 2
    hand_size: tuple[float, float] = (60.0, 60.0)
    hand_score: float = 0.9
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.frames <= 0 or self.width <= 0 or self.height <= 0:
            raise ValueError("scenario geometry must be positive")
        seen = set()
        for obj in self.objects:
            if obj.cls not in TRACKED_CLASSES:
                raise ValueError(f"cannot script class {obj.cls.name}")
            if obj.cls in seen:
                raise ValueError(f"duplicate script for {obj.cls.name}")
            seen.add(obj.cls)
            for seg in obj.segments:
                if not 0 <= seg.start < seg.end <= self.frames:
                    raise ValueError(f"segment [{seg.start}, {seg.end}) out of range")
                for cx, cy in (seg.origin, seg.target):
                    if not (obj.width / 2 <= cx <= self.width - obj.width / 2
                            and obj.height / 2 <= cy <= self.height - obj.height / 2):
                        raise ValueError(
                            f"{obj.cls.name} box leaves the frame at ({cx}, {cy})")
        for start, end, count in self.providers:
            if not 0 <= start < end <= self.frames:
                raise ValueError(f"provider interval [{start}, {end}) out of range")
            if count < 0:
                raise ValueError("provider count cannot be negative")

    def providers_at(self, i: int) -> int:
        for start, end, count in self.providers:
            if start <= i < end:
                return count
        return 0


def _merged_intervals(segments) -> list[tuple[int, int]]:
    spans = sorted((s.start, s.end) for s in segments)
    merged: list[tuple[int, int]] = []
    for start, end in spans:
        if merged and start <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], end))
        else:
            merged.append((start, end))
    return merged


def _clamped_box(cx, cy, w, h, width, height) -> BBox:
    cx = min(max(cx, w / 2.0), width - w / 2.0)
    cy = min(max(cy, h / 2.0), height - h / 2.0)
    return BBox(cx - w / 2.0, cy - h / 2.0, w, h)


def reference_annotation(scenario: Scenario) -> ReferenceAnnotation:
    """Exact ground-truth timelines of a scenario.

    The detected_* tracks are filled with the visibility intervals as a
    stand-in; replace them with timelines derived from an actual run
    (see metrics.detectedness_timeline) to evaluate real output.
    """
    ann = ReferenceAnnotation(scenario.name)
    ann.nhcp = [tuple(p) for p in scenario.providers]
    for obj in scenario.objects:
        visible = _merged_intervals(obj.segments)
        ann.visible[obj.cls] = list(visible)
        ann.detected[obj.cls] = list(visible)
        if obj.activities:
            ann.activities[obj.cls] = [tuple(a) for a in obj.activities]
    ann.validate()
    return ann


def true_boxes(scenario: Scenario) -> dict[ObjectClass, list[Optional[BBox]]]:
    """Noise-free per-frame object boxes implied by the scripts."""
    out: dict[ObjectClass, list[Optional[BBox]]] = {}
    for obj in scenario.objects:
        boxes: list[Optional[BBox]] = []
        for i in range(scenario.frames):
            center = obj.center_at(i)
            if center is None:
                boxes.append(None)
            else:
                boxes.append(_clamped_box(
                    center[0], center[1], obj.width, obj.height,
                    scenario.width, scenario.height))
        out[obj.cls] = boxes
    return out


def generate_episode(
    scenario: Scenario,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Episode, ReferenceAnnotation]:
    """Render a scenario into a detection stream plus its ground truth."""
    if rng is None:
        rng = np.random.default_rng(scenario.seed)
    noise = scenario.noise
    frames = []
    for i in range(scenario.frames):
        detections: list[Detection] = []
        spike = noise.is_spike_frame(i)
        for obj in scenario.objects:
            center = obj.center_at(i)
            if center is None:
                continue
            cx, cy = center
            if spike:
                cx += noise.spike_offset[0]
                cy += noise.spike_offset[1]
            elif noise.dropout > 0 and rng.uniform() < noise.dropout:
                continue
            if noise.jitter_std > 0:
                cx += rng.normal(0.0, noise.jitter_std)
                cy += rng.normal(0.0, noise.jitter_std)
            score = obj.score
            if noise.score_range is not None:
                score = float(rng.uniform(*noise.score_range))
            detections.append(Detection(obj.cls, _clamped_box(
                cx, cy, obj.width, obj.height,
                scenario.width, scenario.height), score))

        hw, hh = scenario.hand_size
        n_hands = scenario.hands_per_provider * scenario.providers_at(i)
        for _ in range(n_hands):
            if noise.dropout > 0 and rng.uniform() < noise.dropout:
                continue
            cx = float(rng.uniform(hw / 2.0, scenario.width - hw / 2.0))
            cy = float(rng.uniform(hh / 2.0, scenario.height - hh / 2.0))
            detections.append(Detection(
                ObjectClass.HCPH,
                _clamped_box(cx, cy, hw, hh, scenario.width, scenario.height),
                scenario.hand_score))

        if noise.false_positives_per_frame > 0:
            fw, fh = noise.fp_size
            for _ in range(int(rng.poisson(noise.false_positives_per_frame))):
                cls = ObjectClass(int(rng.integers(1, 5)))
                cx = float(rng.uniform(fw / 2.0, scenario.width - fw / 2.0))
                cy = float(rng.uniform(fh / 2.0, scenario.height - fh / 2.0))
                lo, hi = noise.score_range or (0.5, 1.0)
                detections.append(Detection(
                    cls,
                    _clamped_box(cx, cy, fw, fh, scenario.width, scenario.height),
                    float(rng.uniform(lo, hi))))

        frames.append(FrameDetections(i, detections))
    episode = Episode(scenario.name, scenario.width, scenario.height, tuple(frames))
    return episode, reference_annotation(scenario)


def serialize_scenario_outputs(
    episode: Episode,
    annotation: ReferenceAnnotation,
) -> tuple[str, str]:
    """Stream text and annotation CSV for a generated episode.

    Convenience for batch runs; the pair is exactly what the simulate
    command writes to disk.
    """
    return serialize_detection_stream(episode), format_annotations([annotation])


# ---------------------------------------------------------------------------
# JSON scenario files

def scenario_from_dict(data: dict) -> Scenario:
    objects = []
    for obj in data.get("objects", []):
        segments = tuple(
            PathSegment(seg["start"], seg["end"],
                        tuple(seg["from"]), tuple(seg.get("to", seg["from"])))
            for seg in obj.get("segments", [])
        )
        activities = tuple(
            (a["start"], a["end"]) for a in obj.get("activities", [])
        )
        objects.append(ObjectScript(
            ObjectClass[obj["class"]], obj["width"], obj["height"],
            obj.get("score", 0.9), segments, activities))

    noise_data = data.get("noise", {})
    noise = NoiseModel(
        dropout=noise_data.get("dropout", 0.0),
        false_positives_per_frame=noise_data.get("false_positives_per_frame", 0.0),
        fp_size=tuple(noise_data.get("fp_size", (40.0, 40.0))),
        jitter_std=noise_data.get("jitter_std", 0.0),
        score_range=(tuple(noise_data["score_range"])
                     if noise_data.get("score_range") else None),
        spike_every=noise_data.get("spike_every", 0),
        spike_len=noise_data.get("spike_len", 2),
        spike_offset=tuple(noise_data.get("spike_offset", (300.0, 0.0))),
    )
    return Scenario(
        name=data["name"],
        frames=data["frames"],
        width=data["width"],
        height=data["height"],
        seed=data.get("seed", 0),
        objects=tuple(objects),
        providers=tuple(tuple(p) for p in data.get("providers", [])),
        hands_per_provider=data.get("hands_per_provider", 2),
        hand_size=tuple(data.get("hand_size", (60.0, 60.0))),
        hand_score=data.get("hand_score", 0.9),
        noise=noise,
    )


def load_scenario(text: str) -> Scenario:
    """Parse a scenario from its JSON representation."""
    return scenario_from_dict(json.loads(text))
