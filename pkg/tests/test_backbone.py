import math
from dataclasses import replace

import numpy as np
import pytest

from smen.backbone import (
    BAC, CON, INS, forward, init_params, load_params, save_params, temporal_window_mean,
    video_scores, weighted_cas,
)
from smen.tensorseq import FeatureSequence, FormatError, InvalidInput

from oracles import loop_forward


def random_params(rng, d, h, C, r=0):
    p = init_params(d, h, C, r, seed=int(rng.integers(1 << 30)))
    return replace(p, embed_b=rng.normal(size=h) * 0.3, cls_b=rng.normal(size=C + 1), attn_b=rng.normal(size=3))


def test_init_deterministic_and_zero_bias():
    a = init_params(8, 16, 3, 1, seed=7)
    b = init_params(8, 16, 3, 1, seed=7)
    assert a == b
    for name in ("embed_b", "cls_b", "attn_b"):
        assert not getattr(a, name).any()
    assert a.embed_w.shape == (8, 16) and a.cls_w.shape == (16, 4) and a.attn_w.shape == (16, 3)


def test_init_bound():
    p = init_params(1, 1, 1, 0, seed=0)
    bound = math.sqrt(6 / 2)
    assert abs(p.embed_w[0, 0]) <= bound
    big = init_params(50, 40, 3, 0, seed=1)
    a = math.sqrt(6 / 90)
    assert np.abs(big.embed_w).max() <= a and np.abs(big.embed_w).max() > 0.9 * a


def test_zero_network():
    p = init_params(4, 5, 2, 1, seed=0)
    p = replace(p, embed_w=np.zeros_like(p.embed_w), cls_w=np.zeros_like(p.cls_w), attn_w=np.zeros_like(p.attn_w))
    out = forward(p, FeatureSequence(np.random.default_rng(0).normal(size=(6, 4))))
    assert not out.cas.any()
    np.testing.assert_allclose(out.attn, 1 / 3)


def test_single_snippet_with_context():
    p = init_params(3, 4, 2, context_radius=2, seed=3)
    x = np.array([[0.5, -1.0, 2.0]])
    out = forward(p, FeatureSequence(x))
    assert out.cas.shape == (1, 3) and out.attn.shape == (1, 3)
    cas, attn = loop_forward(p, x)
    np.testing.assert_allclose(out.cas, cas, atol=1e-12)


def test_forward_matches_loop_oracle_100_cases():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        T, d, h, C = (int(v) for v in rng.integers(1, 7, size=4))
        p = random_params(rng, d, h, C, r=0)
        x = rng.normal(size=(T, d))
        out = forward(p, FeatureSequence(x))
        cas, attn = loop_forward(p, x)
        np.testing.assert_allclose(out.cas, cas, rtol=0, atol=1e-12)
        np.testing.assert_allclose(out.attn, attn, rtol=0, atol=1e-12)


def test_forward_with_context_radius_matches_oracle():
    rng = np.random.default_rng(5)
    for r in (1, 2, 3):
        p = random_params(rng, 3, 4, 2, r=r)
        x = rng.normal(size=(7, 3))
        np.testing.assert_allclose(forward(p, x).cas, loop_forward(p, x)[0], atol=1e-12)


def test_window_mean_clamps_borders():
    x = np.arange(5.0)[:, None]
    np.testing.assert_allclose(temporal_window_mean(x, 1)[:, 0], [0.5, 1, 2, 3, 3.5])


def test_forward_shape_mismatch():
    p = init_params(4, 5, 2, 1, seed=0)
    with pytest.raises(InvalidInput):
        forward(p, FeatureSequence(np.ones((3, 5))))


def test_cls_head_scale_covariance():
    rng = np.random.default_rng(9)
    p = random_params(rng, 5, 6, 3, r=1)
    x = rng.normal(size=(8, 5))
    doubled = replace(p, cls_w=2 * p.cls_w, cls_b=2 * p.cls_b)
    np.testing.assert_array_equal(forward(doubled, x).cas, 2 * forward(p, x).cas)


def test_weighted_cas_examples():
    cas = np.array([[1.0, 2.0], [3.0, -1.0]])
    ones = np.tile([1.0, 0.0, 0.0], (2, 1))
    np.testing.assert_array_equal(weighted_cas(cas, ones, "ins"), cas)
    assert not weighted_cas(cas, ones, "con").any()
    np.testing.assert_allclose(weighted_cas(np.array([[1.0, 2.0]]), np.array([[0.5, 0.25, 0.25]]), INS), [[0.5, 1.0]])


def test_attention_simplex_and_partition_identity():
    rng = np.random.default_rng(11)
    for _ in range(100):
        T, d = int(rng.integers(1, 12)), int(rng.integers(1, 6))
        p = random_params(rng, d, 8, 3, r=int(rng.integers(0, 3)))
        out = forward(p, rng.normal(scale=5, size=(T, d)))
        assert np.all(out.attn >= 0) and np.all(out.attn <= 1)
        np.testing.assert_allclose(out.attn.sum(axis=1), 1, atol=1e-6)
        total = sum(weighted_cas(out.cas, out.attn, b) for b in (INS, CON, BAC))
        np.testing.assert_allclose(total, out.cas, atol=1e-9)


def test_video_scores_examples():
    row = np.array([[0.3, -1.0, 2.0]])
    np.testing.assert_allclose(video_scores(row, 0.5), np.exp(row[0]) / np.exp(row[0]).sum())
    const = np.tile([1.0, 2.0, 0.5], (6, 1))
    for ratio in (0.1, 0.5, 1.0):
        np.testing.assert_allclose(video_scores(const, ratio), np.exp(const[0]) / np.exp(const[0]).sum())
    cas = np.array([[1.0, 0], [3, 0], [2, 0], [0, 0]])
    # pooled column 0 = mean(3, 2) = 2.5, column 1 = 0
    np.testing.assert_allclose(video_scores(cas, 0.5), np.exp([2.5, 0]) / np.exp([2.5, 0]).sum())


def test_checkpoint_round_trip(tmp_path):
    p = init_params(4, 6, 3, 2, seed=1)
    path = tmp_path / "p.prm"
    save_params(path, p)
    raw = path.read_bytes()
    assert raw[:8] == b"SMENPRM1"
    assert len(raw) == 8 + 16 + 8 * (4 * 6 + 6 + 6 * 4 + 4 + 6 * 3 + 3)
    assert load_params(path) == p


def test_checkpoint_rejects_corruption(tmp_path):
    path = tmp_path / "p.prm"
    save_params(path, init_params(2, 3, 1, 0, seed=0))
    raw = path.read_bytes()
    path.write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(FormatError) as exc:
        load_params(path)
    assert exc.value.offset == 0
    path.write_bytes(raw[:-5])
    with pytest.raises(FormatError, match="truncated"):
        load_params(path)
    path.write_bytes(raw + b"\0")
    with pytest.raises(FormatError, match="trailing"):
        load_params(path)
