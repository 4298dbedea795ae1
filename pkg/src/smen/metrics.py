"""Average precision and mAP over t-IoU grids for temporal detections."""

from dataclasses import dataclass

import numpy as np

from .proposals import tiou
from .tensorseq import InvalidInput


def tiou_grid(lo, hi, step):
    n = int(round((hi - lo) / step)) + 1
    return tuple(round(lo + i * step, 4) for i in range(n))


BANDS = {
    "avg[0.1:0.7]": tiou_grid(0.1, 0.7, 0.1),
    "avg[0.3:0.7]": tiou_grid(0.3, 0.7, 0.1),
    "avg[0.1:0.5]": tiou_grid(0.1, 0.5, 0.1),
    "avg[0.5:0.95]": tiou_grid(0.5, 0.95, 0.05),
}
BAND_SETS = {
    "thumos": ("avg[0.1:0.7]", "avg[0.3:0.7]", "avg[0.1:0.5]"),
    "anet": ("avg[0.5:0.95]",),
}


@dataclass(frozen=True)
class GroundTruthSegment:
    video_id: str
    class_id: int
    start_sec: float
    end_sec: float
    slow_motion: bool = False

    def __post_init__(self):
        if not self.start_sec < self.end_sec:
            raise InvalidInput(f"ground truth for {self.video_id} has start >= end")


@dataclass(frozen=True)
class Detection:
    video_id: str
    class_id: int
    start_sec: float
    end_sec: float
    confidence: float


def to_detections(props, snippet_seconds):
    return [Detection(p.video_id, p.class_id, p.start * snippet_seconds,
                      p.end * snippet_seconds, p.confidence) for p in props]


def detection_order(dets):
    return sorted(dets, key=lambda d: (-d.confidence, d.start_sec, d.class_id, d.video_id, d.end_sec))


def average_precision(dets, gts, iou_t):
    """Non-interpolated AP for one class with greedy one-to-one matching."""
    if not gts:
        return 0.0
    pool = {}
    for g in gts:
        pool.setdefault(g.video_id, []).append(g)
    matched = {vid: [False] * len(lst) for vid, lst in pool.items()}
    tp = 0
    total = 0.0
    for rank, d in enumerate(detection_order(dets), 1):
        cands = pool.get(d.video_id, [])
        best, best_iou = -1, -1.0
        for j, g in enumerate(cands):
            if matched[d.video_id][j]:
                continue
            iou = tiou((d.start_sec, d.end_sec), (g.start_sec, g.end_sec))
            if iou > best_iou:
                best, best_iou = j, iou
        if best >= 0 and best_iou >= iou_t:
            matched[d.video_id][best] = True
            tp += 1
            total += tp / rank
    return total / len(gts)


def per_class_ap(dets, gts, iou_t):
    classes = sorted({g.class_id for g in gts})
    return {c: average_precision([d for d in dets if d.class_id == c],
                                 [g for g in gts if g.class_id == c], iou_t)
            for c in classes}


def map_at(dets, gts, iou_t):
    aps = per_class_ap(dets, gts, iou_t)
    return float(np.mean(list(aps.values()))) if aps else 0.0


def map_bands(dets, gts, bands=None):
    """mAP at every threshold used by ``bands`` plus each band's average.

    ``bands`` maps a band name to its t-IoU thresholds; defaults to all of
    :data:`BANDS`.
    """
    bands = BANDS if bands is None else bands
    thresholds = sorted({t for grid in bands.values() for t in grid})
    per_t = {t: map_at(dets, gts, t) for t in thresholds}
    averages = {name: float(np.mean([per_t[t] for t in grid])) for name, grid in bands.items()}
    return {"per_threshold": per_t, "bands": averages}


def slow_subset_filter(gts):
    return [g for g in gts if g.slow_motion]


def report_csv(report):
    lines = ["threshold,mAP"]
    lines += [f"{t:.2f},{m:.6f}" for t, m in report["per_threshold"].items()]
    lines += [f"{name},{m:.6f}" for name, m in report["bands"].items()]
    return "\n".join(lines) + "\n"


def report_table(report):
    ts = list(report["per_threshold"])
    head = "mAP@t-IoU(%) | " + " ".join(f"{t:>5.2f}" for t in ts)
    vals = "             | " + " ".join(f"{100 * report['per_threshold'][t]:5.1f}" for t in ts)
    bands = "  ".join(f"{name}={100 * v:.1f}" for name, v in report["bands"].items())
    return "\n".join([head, "-" * len(head), vals, bands]) + "\n"
