"""Evaluation machinery: tracking accuracy, quartiles, activity detection,
provider-count error and PASCAL-VOC-style average precision.

Reference annotations are interval CSVs with the columns

    episode,label,start_frame,end_frame,value

where label is one of nHCP, activity_<CLS>, visible_<CLS> or
detected_<CLS> for the tracked classes BMR, SP, HRS. Intervals are
half-open frame ranges [start_frame, end_frame).
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import BBox, ObjectClass, TRACKED_CLASSES

# Quantile convention: linear interpolation between closest ranks at
# virtual index (n - 1) * q (the same rule numpy calls "linear").
QUARTILE_FRACTIONS = (0.25, 0.5, 0.75)

ACTIVITY_NAMES = {
    ObjectClass.BMR: "Ventilation",
    ObjectClass.HRS: "Attach/remove HRS",
    ObjectClass.SP: "Suction",
}

HCP_BAND_NAMES = ("No HCP", "One HCP", "Two HCPs", "Three (or more) HCPs")


def frame_performance(detection: np.ndarray, reference: np.ndarray) -> float:
    """Percentage of frames where the two timelines agree exactly."""
    detection = np.asarray(detection)
    reference = np.asarray(reference)
    if detection.shape != reference.shape:
        raise ValueError(
            f"timeline lengths differ: {detection.shape} vs {reference.shape}")
    n = detection.size
    if n == 0:
        raise ValueError("timelines must contain at least one frame")
    matches = int(np.count_nonzero(detection == reference))
    return 100.0 * (matches / n)


def quartiles(values: Sequence[float]) -> tuple[float, float, float]:
    """(Q25, Q50, Q75) by linear interpolation between closest ranks."""
    data = sorted(float(v) for v in values)
    n = len(data)
    if n == 0:
        raise ValueError("quartiles of an empty list are undefined")
    out = []
    for q in QUARTILE_FRACTIONS:
        pos = (n - 1) * q
        lo = math.floor(pos)
        hi = math.ceil(pos)
        out.append(data[lo] + (pos - lo) * (data[hi] - data[lo]))
    return tuple(out)


def activity_detected(interval: tuple[int, int], detected: np.ndarray) -> bool:
    """True when detection covers strictly more than 80% of the interval."""
    start, end = interval
    if start < 0 or end <= start:
        raise ValueError(f"bad activity interval {interval}")
    window = np.asarray(detected, dtype=bool)[start:end]
    if len(window) != end - start:
        raise ValueError(f"interval {interval} exceeds the timeline")
    return int(np.count_nonzero(window)) / (end - start) > 0.8


@dataclass(frozen=True)
class ActivityRate:
    """Share of activity intervals classified as detected."""

    percentage: float
    detected: int
    total: int

    @property
    def vacuous(self) -> bool:
        return self.total == 0


def activity_detection_rate(
    intervals: Sequence[tuple[int, int]],
    detected: np.ndarray,
) -> ActivityRate:
    """Evaluate activity_detected over a list of intervals.

    With no intervals the rate is reported as a vacuous 100%.
    """
    total = len(intervals)
    if total == 0:
        return ActivityRate(100.0, 0, 0)
    hits = sum(1 for iv in intervals if activity_detected(iv, detected))
    return ActivityRate(100.0 * hits / total, hits, total)


def hcp_error(predicted: np.ndarray, reference: np.ndarray) -> float:
    """Mean absolute difference between provider-count timelines."""
    predicted = np.asarray(predicted, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if predicted.shape != reference.shape:
        raise ValueError(
            f"timeline lengths differ: {predicted.shape} vs {reference.shape}")
    if predicted.size == 0:
        raise ValueError("timelines must contain at least one frame")
    return float(np.abs(predicted - reference).sum()) / predicted.size


def detectedness_timeline(
    track_boxes: Sequence[Optional[BBox]],
    true_boxes: Sequence[Optional[BBox]],
    min_coverage: float = 0.5,
) -> np.ndarray:
    """Per-frame flag: the true object is mostly inside the tracking box.

    A frame counts as detected when the object is present and the tracking
    box covers strictly more than min_coverage of its area.
    """
    if len(track_boxes) != len(true_boxes):
        raise ValueError("timeline lengths differ")
    out = np.zeros(len(true_boxes), dtype=bool)
    for i, (track, truth) in enumerate(zip(track_boxes, true_boxes)):
        if track is None or truth is None:
            continue
        out[i] = truth.intersection_area(track) > min_coverage * truth.area
    return out


# ---------------------------------------------------------------------------
# Average precision

@dataclass(frozen=True)
class Prediction:
    """A scored box prediction tied to an image id."""

    image_id: str
    box: BBox
    score: float


def average_precision(
    predictions: Sequence[Prediction],
    ground_truths: Mapping[str, Sequence[BBox]],
    iou_threshold: float = 0.5,
) -> Optional[float]:
    """All-points-interpolated average precision for one class.

    Predictions are ranked by descending score; each one greedily claims
    the still-unmatched ground-truth box it overlaps most, counting as a
    true positive when that overlap reaches iou_threshold. Returns None
    when there are no ground-truth boxes.
    """
    n_gt = sum(len(boxes) for boxes in ground_truths.values())
    if n_gt == 0:
        return None
    order = sorted(range(len(predictions)), key=lambda i: -predictions[i].score)
    claimed: dict[str, set[int]] = defaultdict(set)

    tp = np.zeros(len(order))
    fp = np.zeros(len(order))
    for rank, idx in enumerate(order):
        pred = predictions[idx]
        candidates = ground_truths.get(pred.image_id, ())
        best_iou, best_gt = 0.0, None
        for gt_idx, gt_box in enumerate(candidates):
            if gt_idx in claimed[pred.image_id]:
                continue
            overlap = _iou(pred.box, gt_box)
            if overlap > best_iou:
                best_iou, best_gt = overlap, gt_idx
        if best_gt is not None and best_iou >= iou_threshold:
            claimed[pred.image_id].add(best_gt)
            tp[rank] = 1.0
        else:
            fp[rank] = 1.0

    tp_cum = np.cumsum(tp)
    fp_cum = np.cumsum(fp)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)  # denominator is the 1-based rank

    mrec = np.concatenate(([0.0], recall, [1.0]))
    mpre = np.concatenate(([0.0], precision, [0.0]))
    for k in range(len(mpre) - 2, -1, -1):
        mpre[k] = max(mpre[k], mpre[k + 1])
    changed = np.nonzero(mrec[1:] != mrec[:-1])[0]
    return float(np.sum((mrec[changed + 1] - mrec[changed]) * mpre[changed + 1]))


def _iou(a: BBox, b: BBox) -> float:
    inter = a.intersection_area(b)
    if inter <= 0:
        return 0.0
    return inter / (a.area + b.area - inter)


def mean_average_precision(per_class: Mapping[ObjectClass, Optional[float]]) -> float:
    """Unweighted mean over the classes whose AP is defined."""
    defined = [v for v in per_class.values() if v is not None]
    if not defined:
        raise ValueError("no class has a defined average precision")
    return sum(defined) / len(defined)


BOX_GT_HEADER = ("image", "class", "x", "y", "w", "h")
BOX_PRED_HEADER = ("image", "class", "x", "y", "w", "h", "score")


def _read_box_rows(text: str, header: tuple[str, ...]):
    reader = csv.reader(io.StringIO(text))
    for row_no, row in enumerate(reader, start=1):
        if not row or (row_no == 1 and tuple(row) == header):
            continue
        if len(row) != len(header):
            raise ValueError(
                f"box row {row_no}: expected {len(header)} columns, got {len(row)}")
        yield row_no, [c.strip() for c in row]


def parse_box_ground_truth(text: str) -> dict[ObjectClass, dict[str, list[BBox]]]:
    """Read per-image true boxes: image,class,x,y,w,h."""
    out: dict[ObjectClass, dict[str, list[BBox]]] = {cls: {} for cls in ObjectClass}
    for row_no, (image, cls_name, x, y, w, h) in _read_box_rows(text, BOX_GT_HEADER):
        try:
            cls = ObjectClass[cls_name]
            box = BBox(float(x), float(y), float(w), float(h))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"box row {row_no}: {exc}")
        out[cls].setdefault(image, []).append(box)
    return out


def parse_box_predictions(text: str) -> dict[ObjectClass, list[Prediction]]:
    """Read scored box predictions: image,class,x,y,w,h,score."""
    out: dict[ObjectClass, list[Prediction]] = {cls: [] for cls in ObjectClass}
    for row_no, (image, cls_name, x, y, w, h, score) in _read_box_rows(
            text, BOX_PRED_HEADER):
        try:
            cls = ObjectClass[cls_name]
            pred = Prediction(image, BBox(float(x), float(y), float(w), float(h)),
                              float(score))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"box row {row_no}: {exc}")
        out[cls].append(pred)
    return out


def evaluate_detections(
    predictions: Mapping[ObjectClass, Sequence[Prediction]],
    ground_truths: Mapping[ObjectClass, Mapping[str, Sequence[BBox]]],
    iou_threshold: float = 0.5,
) -> dict:
    """Per-class AP plus mAP for single-image detection results."""
    per_class = {
        cls: average_precision(predictions.get(cls, ()),
                               ground_truths.get(cls, {}), iou_threshold)
        for cls in ObjectClass
    }
    return {
        "iou_threshold": iou_threshold,
        "per_class": {cls.name: ap for cls, ap in per_class.items()},
        "map": mean_average_precision(per_class),
    }


# ---------------------------------------------------------------------------
# Reference annotations

ANNOTATION_HEADER = ("episode", "label", "start_frame", "end_frame", "value")

_TRACKED_BY_NAME = {cls.name: cls for cls in TRACKED_CLASSES}


@dataclass
class ReferenceAnnotation:
    """Ground-truth interval timelines of one episode."""

    episode_id: str
    nhcp: list[tuple[int, int, int]] = field(default_factory=list)
    activities: dict[ObjectClass, list[tuple[int, int]]] = field(default_factory=dict)
    visible: dict[ObjectClass, list[tuple[int, int]]] = field(default_factory=dict)
    detected: dict[ObjectClass, list[tuple[int, int]]] = field(default_factory=dict)

    def validate(self):
        for label, intervals in self._tracks():
            last_end = None
            for start, end, *_ in sorted(intervals):
                if start < 0 or end <= start:
                    raise ValueError(
                        f"{self.episode_id}/{label}: bad interval [{start}, {end})")
                if last_end is not None and start < last_end:
                    raise ValueError(
                        f"{self.episode_id}/{label}: overlapping intervals")
                last_end = end

    def _tracks(self):
        yield "nHCP", self.nhcp
        for cls, ivs in self.activities.items():
            yield f"activity_{cls.name}", ivs
        for cls, ivs in self.visible.items():
            yield f"visible_{cls.name}", ivs
        for cls, ivs in self.detected.items():
            yield f"detected_{cls.name}", ivs

    def nhcp_timeline(self, n_frames: int) -> np.ndarray:
        out = np.zeros(n_frames, dtype=np.int64)
        for start, end, value in self.nhcp:
            self._check_range(start, end, n_frames, "nHCP")
            out[start:end] = value
        return out

    def visible_timeline(self, cls: ObjectClass, n_frames: int) -> np.ndarray:
        return self._bool_timeline(self.visible.get(cls, []), n_frames, f"visible_{cls.name}")

    def detected_timeline(self, cls: ObjectClass, n_frames: int) -> np.ndarray:
        return self._bool_timeline(self.detected.get(cls, []), n_frames, f"detected_{cls.name}")

    def _bool_timeline(self, intervals, n_frames, label) -> np.ndarray:
        out = np.zeros(n_frames, dtype=bool)
        for start, end in intervals:
            self._check_range(start, end, n_frames, label)
            out[start:end] = True
        return out

    def _check_range(self, start, end, n_frames, label):
        if start < 0 or end > n_frames:
            raise ValueError(
                f"{self.episode_id}/{label}: interval [{start}, {end}) "
                f"outside 0..{n_frames}")


def parse_annotations(text: str) -> dict[str, ReferenceAnnotation]:
    """Read an annotation CSV into per-episode ReferenceAnnotation."""
    annotations: dict[str, ReferenceAnnotation] = {}
    reader = csv.reader(io.StringIO(text))
    for row_no, row in enumerate(reader, start=1):
        if not row or (row_no == 1 and tuple(row) == ANNOTATION_HEADER):
            continue
        if len(row) != 5:
            raise ValueError(f"annotation row {row_no}: expected 5 columns, got {len(row)}")
        episode_id, label, start_s, end_s, value_s = (c.strip() for c in row)
        try:
            start, end, value = int(start_s), int(end_s), int(value_s)
        except ValueError:
            raise ValueError(f"annotation row {row_no}: non-integer fields")
        ann = annotations.setdefault(episode_id, ReferenceAnnotation(episode_id))
        if label == "nHCP":
            ann.nhcp.append((start, end, value))
        elif label.startswith(("activity_", "visible_", "detected_")):
            kind, _, cls_name = label.partition("_")
            cls = _TRACKED_BY_NAME.get(cls_name)
            if cls is None:
                raise ValueError(f"annotation row {row_no}: unknown class in {label!r}")
            target = getattr(ann, {"activity": "activities"}.get(kind, kind))
            if value:
                target.setdefault(cls, []).append((start, end))
        else:
            raise ValueError(f"annotation row {row_no}: unknown label {label!r}")
    for ann in annotations.values():
        ann.validate()
    return annotations


def format_annotations(annotations: Iterable[ReferenceAnnotation]) -> str:
    """Serialize annotations back to the interval CSV format."""
    lines = [",".join(ANNOTATION_HEADER)]
    for ann in annotations:
        for start, end, value in ann.nhcp:
            lines.append(f"{ann.episode_id},nHCP,{start},{end},{value}")
        for prefix, mapping in (
            ("activity", ann.activities),
            ("visible", ann.visible),
            ("detected", ann.detected),
        ):
            for cls in TRACKED_CLASSES:
                for start, end in mapping.get(cls, []):
                    lines.append(f"{ann.episode_id},{prefix}_{cls.name},{start},{end},1")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Report assembly (three sections: post-processed detection, detection
# during activity, provider-count prediction)

def build_report(
    annotations: Mapping[str, ReferenceAnnotation],
    provider_predictions: Mapping[str, np.ndarray],
) -> dict:
    """Aggregate evaluation results over episodes into one record.

    provider_predictions maps episode id to the quantized provider-count
    timeline; its length defines the episode's frame count.
    """
    missing = sorted(set(annotations) ^ set(provider_predictions))
    if missing:
        raise ValueError(f"episode ids do not line up: {missing}")
    if not annotations:
        raise ValueError("no episodes to evaluate")

    episodes = sorted(annotations)
    n_frames = {e: len(provider_predictions[e]) for e in episodes}

    post_processed = {}
    during_activity = {}
    for cls in TRACKED_CLASSES:
        performances = []
        hits = 0
        total = 0
        for episode in episodes:
            ann = annotations[episode]
            n = n_frames[episode]
            if cls not in ann.visible and cls not in ann.detected:
                continue
            detected = ann.detected_timeline(cls, n)
            visible = ann.visible_timeline(cls, n)
            performances.append(frame_performance(detected, visible))
            for interval in ann.activities.get(cls, []):
                total += 1
                hits += int(activity_detected(interval, detected))
        if performances:
            q = quartiles(performances)
            post_processed[cls.name] = {
                "p_mean": sum(performances) / len(performances),
                "quartiles": list(q),
                "episodes": len(performances),
            }
        rate = ActivityRate(100.0 * hits / total if total else 100.0, hits, total)
        during_activity[cls.name] = {
            "activity": ACTIVITY_NAMES[cls],
            "p": rate.percentage,
            "detected": rate.detected,
            "total": rate.total,
            "vacuous": rate.vacuous,
        }

    per_band: dict[str, Optional[float]] = {}
    band_frames = [0, 0, 0, 0]
    band_matches = [0, 0, 0, 0]
    performances = []
    errors = []
    for episode in episodes:
        ann = annotations[episode]
        n = n_frames[episode]
        reference = ann.nhcp_timeline(n)
        predicted = np.asarray(provider_predictions[episode], dtype=np.int64)
        performances.append(frame_performance(predicted, reference))
        errors.append(hcp_error(predicted, reference))
        for band in range(4):
            sel = reference == band
            band_frames[band] += int(np.count_nonzero(sel))
            band_matches[band] += int(np.count_nonzero(predicted[sel] == band))
    for band in range(4):
        per_band[HCP_BAND_NAMES[band]] = (
            100.0 * band_matches[band] / band_frames[band]
            if band_frames[band] else None
        )

    return {
        "episodes": episodes,
        "object_detection_post_processed": post_processed,
        "object_detection_during_activity": during_activity,
        "hcp_detection": {
            "per_band": per_band,
            "p_mean": sum(performances) / len(performances),
            "quartiles": list(quartiles(performances)),
            "error_mean": sum(errors) / len(errors),
            "error_quartiles": list(quartiles(errors)),
        },
    }


def format_report_text(report: dict) -> str:
    """Render the report record as a readable three-section table."""
    out = []
    out.append("Object detection (post processed)")
    out.append(f"  {'class':<6} {'P_mean':>8}  {'Q25':>8} {'Q50':>8} {'Q75':>8}")
    for name, row in report["object_detection_post_processed"].items():
        q = row["quartiles"]
        out.append(
            f"  {name:<6} {row['p_mean']:>8.2f}  {q[0]:>8.2f} {q[1]:>8.2f} {q[2]:>8.2f}")
    out.append("")
    out.append("Object detection during activity")
    out.append(f"  {'class':<6} {'P':>8}  {'detected/true':>13}  activity")
    for name, row in report["object_detection_during_activity"].items():
        counts = f"{row['detected']}/{row['total']}"
        note = " (no activities)" if row["vacuous"] else ""
        out.append(
            f"  {name:<6} {row['p']:>8.2f}  {counts:>13}  {row['activity']}{note}")
    out.append("")
    out.append("HCP detection")
    hcp = report["hcp_detection"]
    for band, value in hcp["per_band"].items():
        shown = f"{value:>8.2f}" if value is not None else f"{'n/a':>8}"
        out.append(f"  {band:<22} {shown}")
    q = hcp["quartiles"]
    out.append(
        f"  {'P_mean':<22} {hcp['p_mean']:>8.2f}  "
        f"Q {q[0]:.2f}, {q[1]:.2f}, {q[2]:.2f}")
    eq = hcp["error_quartiles"]
    out.append(
        f"  {'E_mean':<22} {hcp['error_mean']:>8.4f}  "
        f"Q {eq[0]:.4f}, {eq[1]:.4f}, {eq[2]:.4f}")
    if "single_image_detection" in report:
        det = report["single_image_detection"]
        out.append("")
        out.append(f"Single-image detection (AP at IoU {det['iou_threshold']})")
        for name, ap in det["per_class"].items():
            shown = f"{ap:>8.4f}" if ap is not None else f"{'n/a':>8}"
            out.append(f"  {name:<6} {shown}")
        out.append(f"  {'mAP':<6} {det['map']:>8.4f}")
    return "\n".join(out) + "\n"
