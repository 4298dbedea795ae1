"""Reference CAS generation network.

One hidden layer over a clamped temporal mean window, followed by a
classification head (C action classes + background) and a three-way
attention head (instance, context, background) normalized per snippet.
"""

from dataclasses import dataclass, replace
import struct

import numpy as np

from .tensorseq import FeatureSequence, FormatError, InvalidInput, softmax

INS, CON, BAC = 0, 1, 2
BRANCHES = {"ins": INS, "con": CON, "bac": BAC}

PARAM_MAGIC = b"SMENPRM1"
MATRIX_FIELDS = ("embed_w", "embed_b", "cls_w", "cls_b", "attn_w", "attn_b")


@dataclass
class BackboneParams:
    embed_w: np.ndarray  # d x h
    embed_b: np.ndarray  # h
    cls_w: np.ndarray  # h x (C+1)
    cls_b: np.ndarray  # C+1
    attn_w: np.ndarray  # h x 3
    attn_b: np.ndarray  # 3
    context_radius: int = 1

    @property
    def d(self):
        return self.embed_w.shape[0]

    @property
    def h(self):
        return self.embed_w.shape[1]

    @property
    def num_classes(self):
        return self.cls_w.shape[1] - 1

    def arrays(self):
        return {name: getattr(self, name) for name in MATRIX_FIELDS}

    def copy(self):
        return replace(self, **{k: v.copy() for k, v in self.arrays().items()})

    def __eq__(self, other):
        if not isinstance(other, BackboneParams):
            return NotImplemented
        return self.context_radius == other.context_radius and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in MATRIX_FIELDS
        )


@dataclass
class BackboneOutput:
    cas: np.ndarray  # T x (C+1) logits
    attn: np.ndarray  # T x 3, rows on the simplex
    embedded: np.ndarray  # T x h
    # retained for the backward pass
    window_mean: np.ndarray = None
    pre_relu: np.ndarray = None


def _glorot(rng, fan_in, fan_out):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out))


def init_params(d, h, C, context_radius=1, seed=0):
    if min(d, h, C) < 1 or context_radius < 0:
        raise InvalidInput("dimensions must be positive and context_radius >= 0")
    rng = np.random.default_rng(seed)
    return BackboneParams(
        embed_w=_glorot(rng, d, h),
        embed_b=np.zeros(h),
        cls_w=_glorot(rng, h, C + 1),
        cls_b=np.zeros(C + 1),
        attn_w=_glorot(rng, h, 3),
        attn_b=np.zeros(3),
        context_radius=int(context_radius),
    )


def zeros_like_params(params):
    return replace(params, **{k: np.zeros_like(v) for k, v in params.arrays().items()})


def temporal_window_mean(x, radius):
    """Mean over rows t-radius..t+radius, window clamped at the borders."""
    if radius == 0:
        return np.array(x, dtype=np.float64)
    T = x.shape[0]
    csum = np.concatenate([np.zeros((1, x.shape[1])), np.cumsum(x, axis=0)])
    t = np.arange(T)
    lo = np.maximum(t - radius, 0)
    hi = np.minimum(t + radius, T - 1) + 1
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def forward(params, x):
    data = x.data if isinstance(x, FeatureSequence) else np.asarray(x, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != params.d:
        raise InvalidInput(f"feature dim {data.shape[-1]} does not match backbone d={params.d}")
    xbar = temporal_window_mean(data, params.context_radius)
    z = xbar @ params.embed_w + params.embed_b
    e = np.maximum(z, 0.0)
    cas = e @ params.cls_w + params.cls_b
    attn = softmax(e @ params.attn_w + params.attn_b, axis=1)
    return BackboneOutput(cas=cas, attn=attn, embedded=e, window_mean=xbar, pre_relu=z)


def weighted_cas(cas, attn, branch):
    """Scale each CAS row by that snippet's attention for one branch."""
    b = BRANCHES[branch] if isinstance(branch, str) else int(branch)
    cas = np.asarray(cas, dtype=np.float64)
    attn = np.asarray(attn, dtype=np.float64)
    if cas.shape[0] != attn.shape[0]:
        raise InvalidInput("cas and attention lengths differ")
    return attn[:, b:b + 1] * cas


def topk_count(T, topk_ratio):
    if not 0 < topk_ratio <= 1:
        raise InvalidInput("topk_ratio must lie in (0, 1]")
    return max(1, int(np.floor(T * topk_ratio)))


def topk_columns(m, k):
    """Row indices of the k largest entries per column, ties to the lowest row."""
    return np.argsort(-m, axis=0, kind="stable")[:k]


def video_scores(cas_branch, topk_ratio=1 / 8):
    """Softmax over classes of the per-class top-k temporal mean."""
    cas_branch = np.asarray(cas_branch, dtype=np.float64)
    k = topk_count(cas_branch.shape[0], topk_ratio)
    pooled = np.take_along_axis(cas_branch, topk_columns(cas_branch, k), axis=0).mean(axis=0)
    return softmax(pooled)


def save_params(path, params):
    with open(path, "wb") as f:
        f.write(PARAM_MAGIC)
        f.write(struct.pack("<4i", params.d, params.h, params.num_classes, params.context_radius))
        for name in MATRIX_FIELDS:
            f.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())


def load_params(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:8] != PARAM_MAGIC:
        raise FormatError(f"{path}: bad magic, expected {PARAM_MAGIC!r}", 0)
    if len(raw) < 24:
        raise FormatError(f"{path}: truncated header", len(raw))
    d, h, C, r = struct.unpack_from("<4i", raw, 8)
    if min(d, h, C) < 1 or r < 0:
        raise FormatError(f"{path}: invalid dimensions {(d, h, C, r)}", 8)
    shapes = {
        "embed_w": (d, h), "embed_b": (h,),
        "cls_w": (h, C + 1), "cls_b": (C + 1,),
        "attn_w": (h, 3), "attn_b": (3,),
    }
    offset = 24
    arrays = {}
    for name in MATRIX_FIELDS:
        n = int(np.prod(shapes[name]))
        end = offset + 8 * n
        if end > len(raw):
            raise FormatError(f"{path}: truncated while reading {name}", len(raw))
        arrays[name] = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).astype(np.float64).reshape(shapes[name])
        offset = end
    if offset != len(raw):
        raise FormatError(f"{path}: trailing bytes after parameters", offset)
    return BackboneParams(context_radius=r, **arrays)

