"""Seeded synthetic untrimmed-video feature corpus.

Each class owns a smooth multi-dimensional trajectory (a class offset plus
a sum of sinusoids per dimension). Action instances paste that trajectory
into a noise background, either at normal pace or stretched in time by
linear interpolation ("slow motion"). Optional context segments next to an
action carry a low-amplitude copy of the same trajectory.
"""

from dataclasses import dataclass, field

import numpy as np

from .metrics import GroundTruthSegment
from .tensorseq import SNIPPET_SECONDS, FeatureSequence, InvalidInput, VideoLabel

N_SINUSOIDS = 3


@dataclass(frozen=True)
class SynthConfig:
    num_videos: int = 40
    num_classes: int = 4
    dim: int = 16
    min_T: int = 96
    max_T: int = 160
    slow_fraction: float = 0.4
    stretch_factor: int = 4
    context_fraction: float = 0.5
    noise_sigma: float = 0.5
    seed: int = 0
    num_test_videos: int = 20
    min_instance: int = 6
    max_instance: int = 12
    context_amplitude: float = 0.35
    min_context: int = 3
    max_context: int = 6
    max_instances: int = 3
    second_class_prob: float = 0.25
    snippet_seconds: float = SNIPPET_SECONDS

    def __post_init__(self):
        if self.min_T > self.max_T:
            raise InvalidInput("min_T must not exceed max_T")
        if self.stretch_factor < 2:
            raise InvalidInput("stretch_factor must be at least 2")
        if not 0.0 <= self.slow_fraction <= 1.0:
            raise InvalidInput("slow_fraction must lie in [0, 1]")
        if self.min_instance < 2 or self.min_instance > self.max_instance:
            raise InvalidInput("instance length range invalid")
        longest = self.max_instance * self.stretch_factor + 2 * self.max_context
        if longest > self.min_T:
            raise InvalidInput(f"min_T={self.min_T} cannot hold a slow instance of {longest} snippets")


@dataclass
class SynthVideo:
    video_id: str
    features: FeatureSequence
    label: VideoLabel
    gts: list = field(default_factory=list)


def _class_spec(class_id, d, seed):
    rng = np.random.default_rng([seed, class_id, 7919])
    offset = rng.normal(size=d)
    offset /= np.linalg.norm(offset) / np.sqrt(d)  # unit RMS offset
    freq = rng.uniform(0.15, 0.6, size=(d, N_SINUSOIDS))
    phase = rng.uniform(0, 2 * np.pi, size=(d, N_SINUSOIDS))
    amp = rng.uniform(0.5, 1.0, size=(d, N_SINUSOIDS))
    return offset, freq, phase, amp


def class_motif(class_id, length, d, seed=0):
    """``length x d`` trajectory for one class.

    The oscillating part is scaled to unit variance per dimension (exactly
    in the long-run limit); the class offset is added on top.
    """
    if length < 2:
        raise InvalidInput("motif length must be at least 2")
    offset, freq, phase, amp = _class_spec(class_id, d, seed)
    t = np.arange(length, dtype=np.float64)[:, None, None]
    waves = (amp * np.sin(freq * t + phase)).sum(axis=2)
    waves /= np.sqrt((amp ** 2).sum(axis=1) / 2.0)
    return waves + offset


def stretch(motif, factor):
    """Row i of the result is the motif linearly interpolated at i / factor."""
    if factor < 1 or int(factor) != factor:
        raise InvalidInput("stretch factor must be a positive integer")
    motif = np.asarray(motif, dtype=np.float64)
    n = motif.shape[0]
    pos = np.arange(n * factor) / factor
    lo = np.minimum(np.floor(pos).astype(int), n - 1)
    hi = np.minimum(lo + 1, n - 1)
    frac = (pos - lo)[:, None]
    return (1.0 - frac) * motif[lo] + frac * motif[hi]


def _plan_video(rng, cfg, T):
    n_cls = 2 if (cfg.num_classes > 1 and rng.random() < cfg.second_class_prob) else 1
    classes = sorted(int(c) for c in rng.choice(cfg.num_classes, size=n_cls, replace=False))
    n_inst = max(int(rng.integers(1, cfg.max_instances + 1)), n_cls)
    blocks = []
    for i in range(n_inst):
        cls = classes[i] if i < n_cls else int(rng.choice(classes))
        base = int(rng.integers(cfg.min_instance, cfg.max_instance + 1))
        slow = bool(rng.random() < cfg.slow_fraction)
        length = base * cfg.stretch_factor if slow else base
        ctx_before = ctx_after = 0
        if rng.random() < cfg.context_fraction:
            ctx_len = int(rng.integers(cfg.min_context, cfg.max_context + 1))
            if rng.random() < 0.5:
                ctx_before = ctx_len
            else:
                ctx_after = ctx_len
        blocks.append(dict(cls=cls, base=base, slow=slow, length=length,
                           ctx_before=ctx_before, ctx_after=ctx_after))
    # drop trailing instances that do not fit, keeping each labelled class
    while len(blocks) > 1 and sum(b["length"] + b["ctx_before"] + b["ctx_after"] for b in blocks) > T - len(blocks) - 1:
        extra = [i for i, b in enumerate(blocks) if sum(x["cls"] == b["cls"] for x in blocks) > 1]
        blocks.pop(extra[-1] if extra else -1)
    return blocks


def generate_video(cfg, index, rng, video_id=None):
    T = int(rng.integers(cfg.min_T, cfg.max_T + 1))
    d = cfg.dim
    blocks = _plan_video(rng, cfg, T)
    feats = rng.normal(scale=cfg.noise_sigma, size=(T, d))

    used = sum(b["length"] + b["ctx_before"] + b["ctx_after"] for b in blocks)
    free = T - used
    # gaps between and around blocks, at least one background snippet between blocks
    inner = len(blocks) - 1
    cuts = np.sort(rng.integers(0, free - inner + 1, size=len(blocks)))
    gaps = np.diff(np.concatenate([[0], cuts])) + np.array([0] + [1] * inner)

    vid = video_id or f"v{index:04d}"
    gts = []
    t = 0
    for b, gap in zip(blocks, gaps):
        t += int(gap)
        motif = class_motif(b["cls"], b["base"] + b["ctx_before"] + b["ctx_after"], d, cfg.seed)
        if b["ctx_before"]:
            feats[t:t + b["ctx_before"]] += cfg.context_amplitude * motif[:b["ctx_before"]]
            t += b["ctx_before"]
        action = motif[b["ctx_before"]:b["ctx_before"] + b["base"]]
        if b["slow"]:
            action = stretch(action, cfg.stretch_factor)
        feats[t:t + b["length"]] += action
        gts.append(GroundTruthSegment(vid, b["cls"], t * cfg.snippet_seconds,
                                      (t + b["length"]) * cfg.snippet_seconds, b["slow"]))
        t += b["length"]
        if b["ctx_after"]:
            tail = motif[b["ctx_before"] + b["base"]:]
            feats[t:t + b["ctx_after"]] += cfg.context_amplitude * tail
            t += b["ctx_after"]

    label = VideoLabel.from_classes(sorted({g.class_id for g in gts}), cfg.num_classes)
    return SynthVideo(vid, FeatureSequence(feats, cfg.snippet_seconds), label, gts)


def generate(cfg, split="train"):
    """Corpus of ``num_videos`` (train) or ``num_test_videos`` (test) videos.

    The class trajectories depend only on ``cfg.seed``; the two splits draw
    their videos from independent streams.
    """
    if split not in ("train", "test"):
        raise InvalidInput(f"unknown split {split!r}")
    n = cfg.num_videos if split == "train" else cfg.num_test_videos
    rng = np.random.default_rng([cfg.seed, 0 if split == "train" else 1])
    prefix = "v" if split == "train" else "t"
    return [generate_video(cfg, i, rng, f"{prefix}{i:04d}") for i in range(n)]


def instance_deltas(features, start, end, step=1):
    """Mean L2 distance between rows ``step`` apart inside [start, end)."""
    seg = np.asarray(features)[start:end:step]
    if seg.shape[0] < 2:
        return np.nan
    return float(np.linalg.norm(np.diff(seg, axis=0), axis=1).mean())
