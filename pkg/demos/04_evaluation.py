"""Evaluation metrics: average precision, tracking accuracy, quartiles.

Small hand-built cases show the metric conventions: all-points PR
interpolation for AP, strict 80% overlap for activity detection, and
linear-interpolation quartiles.
"""

import numpy as np

from resustrack import (
    BBox,
    ObjectClass,
    Prediction,
    activity_detected,
    average_precision,
    frame_performance,
    hcp_error,
    mean_average_precision,
    quartiles,
)

unit = BBox(0, 0, 10, 10)
far = BBox(500, 500, 10, 10)

print("average precision on ranked predictions (IoU threshold 0.5):")
cases = {
    "single hit": ([Prediction("im", BBox(0, 0, 10, 16), 0.9)], {"im": [unit]}),
    "miss then hit": ([Prediction("im", far, 0.9),
                       Prediction("im", unit, 0.8)], {"im": [unit]}),
    "duplicate on one object": ([Prediction("im", unit, 0.9),
                                 Prediction("im", BBox(0, 0, 10, 16), 0.8)],
                                {"im": [unit]}),
}
aps = {}
for name, (preds, gts) in cases.items():
    ap = average_precision(preds, gts)
    aps[name] = ap
    print(f"  {name}: AP = {ap:.3f}")

print(f"mAP over those cases: "
      f"{mean_average_precision(dict(zip(ObjectClass, aps.values()))):.3f}")

print("\ntracking accuracy is plain per-frame agreement:")
detected = np.array([1, 1, 1, 0, 0, 1, 1, 1], dtype=bool)
visible = np.array([1, 1, 1, 1, 0, 1, 1, 1], dtype=bool)
print(f"  P = {frame_performance(detected, visible):.2f}%")

print("\nan activity counts as detected only above 80% coverage:")
coverage = np.zeros(100, dtype=bool)
coverage[:80] = True
print(f"  80% covered -> {activity_detected((0, 100), coverage)}")
coverage[80] = True
print(f"  81% covered -> {activity_detected((0, 100), coverage)}")

print("\nprovider-count error and episode quartiles:")
predicted = np.array([1, 1, 2, 2, 1])
reference = np.array([1, 2, 2, 2, 1])
print(f"  mean absolute error = {hcp_error(predicted, reference):.2f}")
per_episode_p = [96.2, 100.0, 88.5, 100.0, 91.0]
print(f"  quartiles of {per_episode_p} = {quartiles(per_episode_p)}")
