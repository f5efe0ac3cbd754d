"""Detection streams: the input format, IoU and non-maximum suppression.

Builds a tiny two-frame stream by hand, round-trips it through the
line-delimited format, and shows what NMS keeps.
"""

from resustrack import (
    BBox,
    Detection,
    Episode,
    FrameDetections,
    ObjectClass,
    iou,
    nms,
    parse_detection_stream,
    serialize_detection_stream,
)

# Two frames: a confident BMR with a weaker overlapping duplicate, and a
# frame with a low-scoring hand that NMS should drop.
frames = [
    FrameDetections(0, [
        Detection(ObjectClass.BMR, BBox(100, 120, 80, 60), 0.92),
        Detection(ObjectClass.BMR, BBox(105, 118, 80, 60), 0.41),
        Detection(ObjectClass.HCPH, BBox(400, 300, 60, 60), 0.77),
    ]),
    FrameDetections(1, [
        Detection(ObjectClass.HCPH, BBox(420, 310, 60, 60), 0.03),
    ]),
]
episode = Episode("demo", 1280, 1024, frames)

text = serialize_detection_stream(episode)
print("stream representation:")
print(text)

assert parse_detection_stream(text) == episode
print("parse(serialize(episode)) round-trips exactly\n")

a = frames[0].detections[0].box
b = frames[0].detections[1].box
print(f"IoU of the two BMR boxes: {iou(a, b):.3f}")

for frame in episode.frames:
    kept = nms(frame, t_o=0.05, t_iou=0.45)
    print(f"frame {frame.frame_index}: {len(frame.detections)} detections in, "
          f"{len(kept.detections)} out")
    for det in kept.detections:
        print(f"  kept {det.cls.name} score={det.score}")
