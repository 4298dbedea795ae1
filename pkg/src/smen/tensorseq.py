"""Core value types and small numeric primitives shared by the pipeline."""

from dataclasses import dataclass

import numpy as np

SNIPPET_SECONDS = 16.0 / 25.0


class InvalidInput(ValueError):
    """Raised when numeric input violates a documented precondition."""


class FormatError(ValueError):
    """Malformed binary file; carries the byte offset where parsing failed."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def _as_finite(v, name="input"):
    arr = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name} contains non-finite values")
    return arr


@dataclass(frozen=True)
class FeatureSequence:
    """T x d snippet features of one video."""

    data: np.ndarray
    snippet_seconds: float = SNIPPET_SECONDS

    def __post_init__(self):
        data = _as_finite(self.data, "feature sequence")
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise InvalidInput(f"feature sequence must be T x d with T, d >= 1, got {data.shape}")
        if not self.snippet_seconds > 0:
            raise InvalidInput("snippet_seconds must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def T(self):
        return self.data.shape[0]

    @property
    def d(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class VideoLabel:
    """Multi-hot label of length C+1; the last entry is the background bit."""

    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=np.float64)
        if y.ndim != 1 or y.size < 2:
            raise InvalidInput("label must be a vector of length C+1 >= 2")
        if not np.all((y == 0) | (y == 1)):
            raise InvalidInput("label entries must be 0 or 1")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)

    @property
    def num_classes(self):
        return self.y.size - 1

    @property
    def classes(self):
        return [int(c) for c in np.flatnonzero(self.y[:-1])]

    @classmethod
    def from_classes(cls, classes, num_classes):
        y = np.zeros(num_classes + 1)
        y[list(classes)] = 1.0
        return cls(y)

    def __eq__(self, other):
        return isinstance(other, VideoLabel) and np.array_equal(self.y, other.y)

    __hash__ = None


def min_max_normalize(v):
    """Rescale to [0, 1]. A constant vector maps to all zeros."""
    v = _as_finite(v)
    if v.size == 0:
        raise InvalidInput("cannot normalize an empty vector")
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def softmax(v, axis=-1):
    v = _as_finite(v)
    z = v - v.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def topk_indices(v, k):
    """Indices of the k largest entries; ties go to the lowest index."""
    v = np.asarray(v, dtype=np.float64)
    if not 1 <= k <= v.size:
        raise InvalidInput(f"k={k} out of range for length {v.size}")
    return np.argsort(-v, kind="stable")[:k]


def topk_mean(v, k):
    v = np.asarray(v, dtype=np.float64)
    return float(v[topk_indices(v, k)].mean())
