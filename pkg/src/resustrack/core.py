"""Domain types, detection-stream ingestion, IoU and non-maximum suppression.

A detection stream is a line-delimited file with one JSON record per frame:

    {"episode": "ep01", "frame": 0, "width": 1280, "height": 1024,
     "detections": [{"class": "BMR", "x": 10, "y": 20, "w": 80, "h": 60,
                     "score": 0.9}]}

Frames missing from the input are materialized as empty so that all
downstream timelines are dense in the frame index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import Optional


class StreamError(ValueError):
    """Malformed or inconsistent detection stream.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ObjectClass(IntEnum):
    """The four detectable object classes.

    BMR, SP and HRS are tracked as single objects; HCPH (provider hands)
    can occur several times per frame and is only counted.
    """

    BMR = 1   # bag-mask resuscitator
    SP = 2    # suction penguin
    HRS = 3   # heart rate sensor
    HCPH = 4  # health care provider hand


TRACKED_CLASSES = (ObjectClass.BMR, ObjectClass.SP, ObjectClass.HRS)


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus size, in pixels.

    Pixel intervals are half-open, [x, x+w) by [y, y+h), so integer boxes
    cover exactly w*h pixels.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for v in (self.x, self.y, self.w, self.h):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box field in {self!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box must have positive size, got {self!r}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be non-negative, got {self!r}")

    @property
    def area(self) -> float:
        return self.w * self.h

    def intersection_area(self, other: "BBox") -> float:
        iw = min(self.x + self.w, other.x + other.w) - max(self.x, other.x)
        ih = min(self.y + self.h, other.y + other.h) - max(self.y, other.y)
        if iw <= 0 or ih <= 0:
            return 0.0
        return iw * ih


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1].

    All areas are derived from the same interval endpoints so that
    identical boxes give exactly 1.0 and the ratio never exceeds 1.
    """
    ax1, ay1 = a.x + a.w, a.y + a.h
    bx1, by1 = b.x + b.w, b.y + b.h
    iw = min(ax1, bx1) - max(a.x, b.x)
    ih = min(ay1, by1) - max(a.y, b.y)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    area_a = (ax1 - a.x) * (ay1 - a.y)
    area_b = (bx1 - b.x) * (by1 - b.y)
    return inter / (area_a + area_b - inter)


@dataclass(frozen=True)
class Detection:
    """One detector output: class, box and objectness score."""

    cls: ObjectClass
    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class FrameDetections:
    """All detections of one video frame."""

    frame_index: int
    detections: tuple[Detection, ...] = ()

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError("frame_index must be >= 0")
        object.__setattr__(self, "detections", tuple(self.detections))

    def of_class(self, cls: ObjectClass) -> tuple[Detection, ...]:
        return tuple(d for d in self.detections if d.cls == cls)


@dataclass(frozen=True)
class Episode:
    """One recording's full detection stream with fixed frame geometry."""

    episode_id: str
    frame_width: int
    frame_height: int
    frames: tuple[FrameDetections, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.frames:
            if self.frame_width <= 0 or self.frame_height <= 0:
                raise ValueError("frame dimensions must be positive")
            indices = [f.frame_index for f in self.frames]
            if any(b <= a for a, b in zip(indices, indices[1:])):
                raise ValueError("frame indices must be strictly increasing")
        elif self.frame_width < 0 or self.frame_height < 0:
            raise ValueError("frame dimensions must be non-negative")

    @property
    def n_frames(self) -> int:
        return len(self.frames)


@dataclass(frozen=True)
class PipelineConfig:
    """Thresholds and parameters for the tracking and counting pipeline.

    The defaults are the operating values used throughout this package;
    every field can be overridden from a key=value config file or from
    CLI flags (flags win over the file, the file wins over defaults).
    """

    t_o: float = 0.05            # NMS objectness floor
    t_iou: float = 0.45          # NMS same-class overlap threshold
    t_obj_bmr: float = 0.1       # accumulated-objectness gates per class
    t_obj_sp: float = 0.05
    t_obj_hrs: float = 0.1
    t_hcph: float = 0.1          # hand-count score gate
    t_peak: float = 200.0        # jump size treated as a candidate spike
    t_stable: float = 50.0       # return-to-baseline tolerance
    peak_lookahead: int = 10     # frames scanned for a return
    n_f1: int = 5                # position smoothing window parameter
    n_f2: int = 40               # hand-count smoothing window parameter
    t_zero: float = 0.2          # provider-count band edges
    t_one: float = 2.0
    t_two: float = 4.0
    track_box_size: float = 500.0
    apply_nms: bool = True       # run NMS at ingestion
    centroid_mode: str = "max"   # "max" or "above_threshold"
    downscale: int = 1           # objectness raster downscale (approximation)

    def __post_init__(self):
        numeric = (
            self.t_o, self.t_iou, self.t_obj_bmr, self.t_obj_sp,
            self.t_obj_hrs, self.t_hcph, self.t_peak, self.t_stable,
            self.t_zero, self.t_one, self.t_two,
        )
        if any(v < 0 for v in numeric):
            raise ValueError("thresholds must be non-negative")
        if not self.t_zero < self.t_one < self.t_two:
            raise ValueError("provider-count bands must satisfy t_zero < t_one < t_two")
        if self.n_f1 < 1 or self.n_f2 < 1:
            raise ValueError("smoothing window parameters must be >= 1")
        if self.peak_lookahead < 1:
            raise ValueError("peak_lookahead must be >= 1")
        if self.track_box_size <= 0:
            raise ValueError("track_box_size must be positive")
        if self.centroid_mode not in ("max", "above_threshold"):
            raise ValueError(f"unknown centroid_mode {self.centroid_mode!r}")
        if self.downscale < 1:
            raise ValueError("downscale must be >= 1")

    def t_obj(self, cls: ObjectClass) -> float:
        """Objectness gate for a tracked class."""
        if cls == ObjectClass.BMR:
            return self.t_obj_bmr
        if cls == ObjectClass.SP:
            return self.t_obj_sp
        if cls == ObjectClass.HRS:
            return self.t_obj_hrs
        raise ValueError(f"{cls.name} has no objectness gate")

    _BOOL_FIELDS = ("apply_nms",)
    _INT_FIELDS = ("peak_lookahead", "n_f1", "n_f2", "downscale")
    _STR_FIELDS = ("centroid_mode",)

    def with_overrides(self, values: dict) -> "PipelineConfig":
        """Return a copy with string key=value overrides applied."""
        parsed = {}
        for key, raw in values.items():
            if key not in self.__dataclass_fields__:
                raise ValueError(f"unknown config key {key!r}")
            if key in self._BOOL_FIELDS:
                parsed[key] = _parse_bool(raw)
            elif key in self._INT_FIELDS:
                parsed[key] = int(raw)
            elif key in self._STR_FIELDS:
                parsed[key] = str(raw)
            else:
                parsed[key] = float(raw)
        return replace(self, **parsed)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _parse_bool(raw) -> bool:
    if isinstance(raw, bool):
        return raw
    text = str(raw).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot parse boolean from {raw!r}")


def load_config_file(path) -> dict:
    """Read a key=value config file (one pair per line, # comments)."""
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
    return values


def _clip_box_to_frame(x, y, w, h, width, height) -> Optional[BBox]:
    """Intersect a raw box with the frame rectangle; None if nothing remains.

    Boxes already inside the frame are passed through untouched so that
    parse/serialize round trips preserve them bit for bit.
    """
    x, y, w, h = float(x), float(y), float(w), float(h)
    x0 = max(0.0, x)
    y0 = max(0.0, y)
    x1 = min(float(width), x + w)
    y1 = min(float(height), y + h)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        return None
    if x0 == x and y0 == y and x1 == x + w and y1 == y + h:
        return BBox(x, y, w, h)
    return BBox(x0, y0, x1 - x0, y1 - y0)


def _parse_frame_record(record, line_no) -> tuple[str, int, int, int, FrameDetections]:
    try:
        episode_id = record["episode"]
        frame_index = record["frame"]
        width = record["width"]
        height = record["height"]
        raw_dets = record["detections"]
    except (KeyError, TypeError) as exc:
        raise StreamError(f"missing field in frame record: {exc}", line_no)
    if not isinstance(frame_index, int) or frame_index < 0:
        raise StreamError(f"invalid frame index {frame_index!r}", line_no)
    if not isinstance(width, int) or not isinstance(height, int) or width <= 0 or height <= 0:
        raise StreamError(f"invalid frame dimensions {width!r}x{height!r}", line_no)

    detections = []
    for det in raw_dets:
        try:
            cls = ObjectClass[det["class"]]
            box = _clip_box_to_frame(det["x"], det["y"], det["w"], det["h"], width, height)
            score = float(det["score"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StreamError(f"invalid detection {det!r}: {exc}", line_no)
        if box is None:
            continue  # entirely outside the frame
        if not 0.0 <= score <= 1.0:
            raise StreamError(f"score out of range in {det!r}", line_no)
        detections.append(Detection(cls, box, score))
    return episode_id, frame_index, width, height, FrameDetections(frame_index, detections)


def parse_detection_streams(text: str) -> list[Episode]:
    """Parse a detection stream that may interleave several episodes.

    Returns one dense Episode per episode id, in order of first appearance.
    Frames absent from the input become empty FrameDetections.
    """
    order = []
    dims: dict[str, tuple[int, int]] = {}
    frames: dict[str, dict[int, FrameDetections]] = {}

    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise StreamError(f"invalid JSON: {exc}", line_no)
        episode_id, idx, width, height, frame = _parse_frame_record(record, line_no)
        if episode_id not in dims:
            order.append(episode_id)
            dims[episode_id] = (width, height)
            frames[episode_id] = {}
        elif dims[episode_id] != (width, height):
            raise StreamError(
                f"episode {episode_id!r} changes dimensions from "
                f"{dims[episode_id]} to {(width, height)}", line_no)
        if idx in frames[episode_id]:
            raise StreamError(f"duplicate frame {idx} for episode {episode_id!r}", line_no)
        frames[episode_id][idx] = frame

    episodes = []
    for episode_id in order:
        width, height = dims[episode_id]
        by_index = frames[episode_id]
        dense = tuple(
            by_index.get(i, FrameDetections(i))
            for i in range(max(by_index) + 1)
        )
        episodes.append(Episode(episode_id, width, height, dense))
    return episodes


def parse_detection_stream(text: str) -> Episode:
    """Parse a single-episode detection stream.

    Empty input yields an empty Episode; mixed episode ids are an error.
    """
    episodes = parse_detection_streams(text)
    if not episodes:
        return Episode("", 0, 0, ())
    if len(episodes) > 1:
        ids = ", ".join(e.episode_id for e in episodes)
        raise StreamError(f"expected one episode, found several: {ids}")
    return episodes[0]


def serialize_detection_stream(episode: Episode) -> str:
    """Serialize an Episode back to the line-delimited stream format."""
    lines = []
    for frame in episode.frames:
        record = {
            "episode": episode.episode_id,
            "frame": frame.frame_index,
            "width": episode.frame_width,
            "height": episode.frame_height,
            "detections": [
                {"class": d.cls.name, "x": d.box.x, "y": d.box.y,
                 "w": d.box.w, "h": d.box.h, "score": d.score}
                for d in frame.detections
            ],
        }
        lines.append(json.dumps(record))
    return "\n".join(lines) + ("\n" if lines else "")


def nms(frame: FrameDetections, t_o: float, t_iou: float) -> FrameDetections:
    """Non-maximum suppression for one frame.

    Drops detections scoring below t_o, then greedily keeps the higher
    scorer among same-class pairs overlapping more than t_iou. Survivors
    come out in descending score order (ties keep input order).
    """
    candidates = sorted(
        (d for d in frame.detections if d.score >= t_o),
        key=lambda d: -d.score,
    )
    kept: list[Detection] = []
    for det in candidates:
        suppressed = any(
            k.cls == det.cls and iou(k.box, det.box) > t_iou for k in kept
        )
        if not suppressed:
            kept.append(det)
    return FrameDetections(frame.frame_index, kept)


def apply_nms(episode: Episode, t_o: float, t_iou: float) -> Episode:
    """Run nms over every frame of an episode."""
    return replace(episode, frames=tuple(nms(f, t_o, t_iou) for f in episode.frames))
