"""Slow-motion mining: sub-sampled CAS -> smoothed binary snippet mask.

The miner is a frozen backbone run on features kept at one snippet per
``tau``. Its per-snippet action activation (max over action classes) is
min-max normalized, raised to a power driven by the coefficient of
variation, thresholded, and mapped back to the full length by
nearest-neighbour upsampling. The resulting mask zeroes snippets in the
original features.
"""

from dataclasses import dataclass

import numpy as np

from .backbone import forward
from .tensorseq import FeatureSequence, InvalidInput, min_max_normalize

ALPHA_MIN = 0.05


@dataclass(frozen=True)
class MiningConfig:
    tau: int = 4
    theta: float = 0.4
    s: float = 0.3
    smooth_enabled: bool = True

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise InvalidInput("tau must be a positive integer")
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidInput("theta must lie in [0, 1]")
        if self.s < 0:
            raise InvalidInput("s must be non-negative")


@dataclass(frozen=True)
class SlowMask:
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 1 or not np.all((bits == 0) | (bits == 1)):
            raise InvalidInput("mask must be a 0/1 vector")
        bits = bits.astype(np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        return isinstance(other, SlowMask) and np.array_equal(self.bits, other.bits)

    def to_bitstring(self):
        return "".join("1" if b else "0" for b in self.bits)

    @classmethod
    def from_bitstring(cls, text):
        if not text or set(text) - {"0", "1"}:
            raise InvalidInput(f"invalid mask bitstring {text!r}")
        return cls(np.array([int(ch) for ch in text]))


def subsample(x, tau, video_id=None):
    """Keep rows 0, tau, 2*tau, ... (floor(T/tau) rows)."""
    n = x.T // tau
    if n < 1:
        where = f" for video {video_id}" if video_id is not None else ""
        raise InvalidInput(f"sequence length {x.T} shorter than tau={tau}{where}")
    return FeatureSequence(x.data[: n * tau: tau], x.snippet_seconds)


def activation_track(cas):
    """Per-snippet max over action classes; the background column is ignored."""
    cas = np.asarray(cas, dtype=np.float64)
    return cas[:, :-1].max(axis=1)


def smoothing_exponent(m_norm, s):
    mean = float(np.mean(m_norm))
    if mean == 0.0:
        return 1.0
    cv = float(np.std(m_norm)) / mean  # population std
    return float(np.clip(1.0 - s * cv, ALPHA_MIN, 1.0))


def smooth_activations(m_norm, s=0.3, smooth_enabled=True):
    m_norm = np.asarray(m_norm, dtype=np.float64)
    if not smooth_enabled or np.mean(m_norm) == 0.0:
        return m_norm.copy()
    return m_norm ** smoothing_exponent(m_norm, s)


def binarize(m_smooth, theta=0.4):
    return (np.asarray(m_smooth) >= theta).astype(np.int8)


def upsample_mask(mask, T):
    """Nearest-neighbour upsampling using bin centres."""
    mask = np.asarray(mask)
    L = mask.size
    if L < 1 or T < L:
        raise InvalidInput(f"cannot upsample a length-{L} mask to {T}")
    idx = np.minimum(np.floor((np.arange(T) + 0.5) * L / T).astype(int), L - 1)
    return SlowMask(mask[idx])


def apply_mask(x, mask):
    if not isinstance(x, FeatureSequence):
        x = FeatureSequence(x)
    bits = mask.bits if isinstance(mask, SlowMask) else np.asarray(mask)
    if bits.size != x.T:
        raise InvalidInput(f"mask length {bits.size} != sequence length {x.T}")
    return FeatureSequence(x.data * bits[:, None], x.snippet_seconds)


def smooth_track(miner_params, x, cfg):
    """Pre-binarization track on the sub-sampled grid (for inspection)."""
    sub = subsample(x, cfg.tau)
    cas = forward(miner_params, sub).cas
    m_norm = min_max_normalize(activation_track(cas))
    return smooth_activations(m_norm, cfg.s, cfg.smooth_enabled)


def generate_mask(miner_params, x, cfg=MiningConfig()):
    track = smooth_track(miner_params, x, cfg)
    return upsample_mask(binarize(track, cfg.theta), x.T)
