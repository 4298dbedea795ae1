"""Turn fused CAS + attention into scored temporal proposals, then NMS."""

from dataclasses import dataclass

import numpy as np

from .backbone import INS, video_scores, weighted_cas
from .tensorseq import InvalidInput, sigmoid


@dataclass(frozen=True)
class Proposal:
    class_id: int
    start: int  # snippet index, inclusive
    end: int  # snippet index, exclusive
    confidence: float
    video_id: str = ""

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise InvalidInput(f"invalid proposal segment [{self.start}, {self.end})")
        if not np.isfinite(self.confidence):
            raise InvalidInput("proposal confidence must be finite")


@dataclass(frozen=True)
class PostprocessConfig:
    act_thresholds: tuple = tuple(round(0.1 * i, 1) for i in range(1, 10))
    nms_iou: float = 0.5
    class_threshold: float = 0.1
    outer_margin_ratio: float = 0.25
    topk_ratio: float = 1 / 8

    def __post_init__(self):
        th = list(self.act_thresholds)
        if th != sorted(th) or not all(0 < t < 1 for t in th):
            raise InvalidInput("act_thresholds must be ascending values in (0, 1)")
        if not 0 < self.nms_iou < 1:
            raise InvalidInput("nms_iou must lie in (0, 1)")


def runs_above(track, threshold):
    """Maximal [start, end) runs where track >= threshold."""
    above = np.concatenate([[False], np.asarray(track) >= threshold, [False]])
    edges = np.flatnonzero(above[1:] != above[:-1])
    return [(int(s), int(e)) for s, e in zip(edges[::2], edges[1::2])]


def outer_inner_contrast(track, start, end, margin_ratio):
    """Mean inside the segment minus mean over the flanking margins."""
    track = np.asarray(track, dtype=np.float64)
    inner = track[start:end].mean()
    width = int(np.ceil(margin_ratio * (end - start)))
    left = track[max(0, start - width):start]
    right = track[end:min(track.size, end + width)]
    outer = np.concatenate([left, right])
    return float(inner - (outer.mean() if outer.size else 0.0))


def class_tracks(cas, attn):
    """u_c(t) = attn_ins(t) * sigmoid(cas[t, c]) for every action class."""
    cas = np.asarray(cas, dtype=np.float64)
    attn = np.asarray(attn, dtype=np.float64)
    return attn[:, INS:INS + 1] * sigmoid(cas[:, :-1])


def generate(cas, attn, cfg=PostprocessConfig(), video_id=""):
    cas = np.asarray(cas, dtype=np.float64)
    attn = np.asarray(attn, dtype=np.float64)
    if cas.shape[0] != attn.shape[0]:
        raise InvalidInput("cas and attention lengths differ")
    # class selection normalises over the action columns only, so a large
    # background logit (common after max fusion) cannot veto every class
    scores = video_scores(weighted_cas(cas, attn, INS)[:, :-1], cfg.topk_ratio)
    tracks = class_tracks(cas, attn)
    props = []
    for c in range(cas.shape[1] - 1):
        if scores[c] < cfg.class_threshold:
            continue
        u = tracks[:, c]
        for theta in cfg.act_thresholds:
            for s, e in runs_above(u, theta):
                conf = outer_inner_contrast(u, s, e, cfg.outer_margin_ratio)
                props.append(Proposal(c, s, e, conf, video_id))
    return props


def tiou(a, b):
    """Temporal IoU of two (start, end) segments on the real line."""
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union > 0 else 0.0


def sort_key(p):
    return (-p.confidence, p.start, p.class_id, p.video_id, p.end)


def nms(props, iou_threshold=0.5):
    """Greedy per-(video, class) suppression in confidence order."""
    kept = []
    by_group = {}
    for p in sorted(props, key=sort_key):
        group = by_group.setdefault((p.video_id, p.class_id), [])
        if all(tiou((p.start, p.end), (q.start, q.end)) < iou_threshold for q in group):
            group.append(p)
            kept.append(p)
    return kept


def postprocess(cas, attn, cfg=PostprocessConfig(), video_id=""):
    return nms(generate(cas, attn, cfg, video_id), cfg.nms_iou)
