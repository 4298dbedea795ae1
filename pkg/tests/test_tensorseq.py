import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smen.tensorseq import (
    FeatureSequence, InvalidInput, VideoLabel, min_max_normalize, softmax, topk_mean,
)

finite = st.floats(-1e6, 1e6, allow_nan=False)
vectors = st.lists(finite, min_size=1, max_size=30)


def test_min_max_examples():
    np.testing.assert_allclose(min_max_normalize([2, 4, 8]), [0, 1 / 3, 1])
    np.testing.assert_array_equal(min_max_normalize([5, 5, 5]), [0, 0, 0])
    np.testing.assert_array_equal(min_max_normalize([0, 1]), [0, 1])


def test_min_max_rejects_non_finite():
    with pytest.raises(InvalidInput):
        min_max_normalize([1.0, np.nan])
    with pytest.raises(InvalidInput):
        min_max_normalize([np.inf, 0.0])


@settings(max_examples=100, deadline=None)
@given(vectors)
def test_min_max_range_and_argmax(v):
    out = min_max_normalize(v)
    assert np.all(out >= 0) and np.all(out <= 1)
    if max(v) > min(v):
        assert np.argmax(out) == np.argmax(v)


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0, 0, 0]), [1 / 3] * 3)
    out = softmax([1000.0, 0.0])
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out, [1, 0], atol=1e-300)
    np.testing.assert_allclose(softmax([np.log(2), 0]), [2 / 3, 1 / 3], rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=20), st.floats(-100, 100))
def test_softmax_shift_invariance(v, c):
    p = softmax(v)
    assert abs(p.sum() - 1) < 1e-9 and np.all(p > 0)
    np.testing.assert_allclose(softmax(np.asarray(v) + c), p, atol=1e-9)


def test_topk_mean_examples():
    assert topk_mean([1, 3, 2], 2) == 2.5
    assert topk_mean([7], 1) == 7
    assert topk_mean([1, 1, 1, 1], 3) == 1
    with pytest.raises(InvalidInput):
        topk_mean([1, 2], 3)
    with pytest.raises(InvalidInput):
        topk_mean([1, 2], 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=20))
def test_topk_mean_monotone_in_k(v):
    vals = [topk_mean(v, k) for k in range(1, len(v) + 1)]
    assert vals[-1] == pytest.approx(np.mean(v))
    assert all(a >= b - 1e-9 for a, b in zip(vals, vals[1:]))


def test_feature_sequence_validation():
    x = FeatureSequence(np.ones((3, 2)))
    assert (x.T, x.d) == (3, 2)
    assert x.snippet_seconds == pytest.approx(0.64)
    with pytest.raises(InvalidInput):
        FeatureSequence(np.ones((0, 2)))
    with pytest.raises(InvalidInput):
        FeatureSequence(np.array([[1.0, np.nan]]))
    with pytest.raises(ValueError):
        x.data[0, 0] = 5.0


def test_video_label():
    lab = VideoLabel.from_classes([0, 2], 3)
    np.testing.assert_array_equal(lab.y, [1, 0, 1, 0])
    assert lab.classes == [0, 2] and lab.num_classes == 3
    with pytest.raises(InvalidInput):
        VideoLabel([0.5, 1])
