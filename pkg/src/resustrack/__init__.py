"""Detector-agnostic toolkit for newborn-resuscitation video analysis.

Turns noisy per-frame object-detection streams into smoothed tracking
timelines, fixed-size activity regions and provider-count timelines,
with evaluation metrics, a synthetic-scene compositor and a scripted
episode simulator for oracle testing.
"""

__version__ = "0.1.0"

from .core import (
    BBox,
    Detection,
    Episode,
    FrameDetections,
    ObjectClass,
    PipelineConfig,
    StreamError,
    TRACKED_CLASSES,
    apply_nms,
    iou,
    load_config_file,
    nms,
    parse_detection_stream,
    parse_detection_streams,
    serialize_detection_stream,
)
from .locate import (
    LocationSeries,
    ObjectnessField,
    accumulate_objectness,
    extract_centroid,
    locate_series,
)
from .trackpost import (
    TrackTimeline,
    TrackingStages,
    fill_gaps,
    make_track_boxes,
    remove_short_peaks,
    smooth,
    track_object,
    track_object_stages,
)
from .hcp import HcpTimeline, count_hands, hcp_timeline, quantize_hcp, smooth_counts
from .metrics import (
    ActivityRate,
    Prediction,
    ReferenceAnnotation,
    activity_detected,
    activity_detection_rate,
    average_precision,
    build_report,
    detectedness_timeline,
    evaluate_detections,
    format_annotations,
    format_report_text,
    frame_performance,
    hcp_error,
    mean_average_precision,
    parse_annotations,
    parse_box_ground_truth,
    parse_box_predictions,
    quartiles,
)
from .synthgen import (
    MaskExtractionError,
    ObjectMask,
    SplitTile,
    SynthConfig,
    SynthScene,
    chroma_mask,
    composite_scene,
    extract_mask,
    histogram_match,
    hsl_jitter,
    motion_blur,
    scene_for_index,
    split_image,
)
from .simulate import (
    NoiseModel,
    ObjectScript,
    PathSegment,
    Scenario,
    generate_episode,
    load_scenario,
    reference_annotation,
    serialize_scenario_outputs,
    true_boxes,
)
from .plotting import render_timeline_plot
