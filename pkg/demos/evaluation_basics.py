"""
Proposals, NMS and mAP by hand
==============================

Builds an activation track by hand, turns it into scored proposals, and
scores them against ground truth at several t-IoU thresholds.
"""

import numpy as np

from smen.metrics import GroundTruthSegment, map_bands, report_table, to_detections
from smen.proposals import PostprocessConfig, generate, nms, tiou

# Two classes plus background. Class 0 has a clear bump at snippets 10..19,
# class 1 a weaker one at 30..34; attention puts all weight on "instance".
T = 50
cas = np.full((T, 3), -6.0)
cas[10:20, 0] = 4.0
cas[30:35, 1] = 1.0
attn = np.tile([1.0, 0.0, 0.0], (T, 1))

cfg = PostprocessConfig(class_threshold=0.0)
props = generate(cas, attn, cfg, video_id="demo")
print(len(props), "raw proposals")
kept = nms(props, cfg.nms_iou)
for p in kept:
    print(f"  class {p.class_id} [{p.start}, {p.end}) confidence {p.confidence:.3f}")

print("t-IoU of [0,10) and [5,15):", tiou((0, 10), (5, 15)))

# Ground truth in seconds; snippets are 0.64 s apart.
sec = 0.64
gts = [GroundTruthSegment("demo", 0, 10 * sec, 20 * sec), GroundTruthSegment("demo", 1, 29 * sec, 36 * sec)]
report = map_bands(to_detections(kept, sec), gts)
print(report_table(report))
