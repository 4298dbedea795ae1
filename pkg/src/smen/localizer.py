"""Two-branch localizer: a normal branch on raw features and a slow branch
on mask-filtered features, fused by elementwise max at inference."""

from dataclasses import dataclass, field, replace
import os

import numpy as np

from . import backbone
from .backbone import forward, init_params, load_params, save_params
from .losses import LossWeights, backward, total_loss
from .mining import apply_mask
from .tensorseq import InvalidInput
from .trainer import AdamState, adam_step, batch_schedule, mean_gradients, numeric_guard, _check_finite

MODES = ("full", "n_only", "s_only", "combo")


@dataclass
class LocalizerState:
    n_params: backbone.BackboneParams
    s_params: backbone.BackboneParams
    loss_weights: LossWeights = LossWeights()
    n_adam: AdamState = field(default_factory=AdamState)
    s_adam: AdamState = field(default_factory=AdamState)

    def __post_init__(self):
        n, s = self.n_params, self.s_params
        if (n.d, n.h, n.num_classes) != (s.d, s.h, s.num_classes):
            raise InvalidInput("branch parameter shapes differ")


def init_state(d, h, C, context_radius=1, seed=0, loss_weights=LossWeights()):
    # distinct seeds so the branches do not start (and stay) identical
    return LocalizerState(
        n_params=init_params(d, h, C, context_radius, seed),
        s_params=init_params(d, h, C, context_radius, seed + 1),
        loss_weights=loss_weights,
    )


def fuse(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInput(f"cannot fuse shapes {a.shape} and {b.shape}")
    return np.maximum(a, b)


def step_gradients(state, x, label, mask, topk_ratio=1 / 8):
    """Fused loss and per-branch gradients for one video.

    Each branch carries its own classification, guide and sparsity terms;
    the feature-separation terms enter as (1 - beta) * normal + beta * slow.
    """
    w = state.loss_weights
    x_slow = apply_mask(x, mask)
    out_n = forward(state.n_params, x)
    out_s = forward(state.s_params, x_slow)
    loss_n, g_n = backward(state.n_params, out_n, label, w, topk_ratio, feat_scale=1.0 - w.beta)
    loss_s, g_s = backward(state.s_params, out_s, label, w, topk_ratio, feat_scale=w.beta)
    return loss_n + loss_s, g_n, g_s


def fused_loss(state, x, label, mask, topk_ratio=1 / 8):
    w = state.loss_weights
    out_n = forward(state.n_params, x)
    out_s = forward(state.s_params, apply_mask(x, mask))
    return (total_loss(out_n, label, w, topk_ratio, feat_scale=1.0 - w.beta)
            + total_loss(out_s, label, w, topk_ratio, feat_scale=w.beta))


def train_step(state, x, label, mask, cfg):
    """Single-video update of both branches (separate Adam states)."""
    loss, g_n, g_s = step_gradients(state, x, label, mask, cfg.topk_ratio)
    return _commit(state, g_n, g_s, cfg), loss


def _commit(state, g_n, g_s, cfg):
    n_params, n_adam = adam_step(state.n_params, g_n, state.n_adam, cfg)
    s_params, s_adam = adam_step(state.s_params, g_s, state.s_adam, cfg)
    return replace(state, n_params=n_params, s_params=s_params, n_adam=n_adam, s_adam=s_adam)


def train_localizer(state, corpus, masks, cfg):
    """Batched training of both branches. ``masks`` maps video id -> SlowMask.

    Returns ``(state, loss_curve)``.
    """
    if not corpus:
        raise InvalidInput("cannot train on an empty corpus")
    curve = []
    for it, batch in enumerate(batch_schedule(len(corpus), cfg)):
        losses, gn, gs = [], [], []
        for i in batch:
            video = corpus[i]
            with numeric_guard(it, video.video_id):
                loss, g_n, g_s = step_gradients(state, video.features, video.label,
                                                masks[video.video_id], cfg.topk_ratio)
            _check_finite(loss, it, video.video_id)
            losses.append(loss)
            gn.append(g_n)
            gs.append(g_s)
        state = _commit(state, mean_gradients(gn), mean_gradients(gs), cfg)
        curve.append(float(np.mean(losses)))
    return state, curve


def infer(state, x):
    """Both branches on the unmasked features; CAS and attention max-fused."""
    out_n = forward(state.n_params, x)
    out_s = forward(state.s_params, x)
    return fuse(out_n.cas, out_s.cas), fuse(out_n.attn, out_s.attn)


def infer_combo(state, x, mode="full"):
    if mode == "full":
        return infer(state, x)
    if mode == "n_only":
        out = forward(state.n_params, x)
        return out.cas, out.attn
    if mode == "s_only":
        out = forward(state.s_params, x)
        return out.cas, out.attn
    if mode == "combo":
        return forward(state.n_params, x).cas, forward(state.s_params, x).attn
    raise InvalidInput(f"unknown inference mode {mode!r}; expected one of {MODES}")


def save_state(path, state):
    os.makedirs(path, exist_ok=True)
    save_params(os.path.join(path, "n_branch.prm"), state.n_params)
    save_params(os.path.join(path, "s_branch.prm"), state.s_params)
    with open(os.path.join(path, "loss_weights.txt"), "w") as f:
        for k, v in vars(state.loss_weights).items():
            f.write(f"{k}={v!r}\n")


def load_state(path):
    weights = {}
    with open(os.path.join(path, "loss_weights.txt")) as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep or key not in LossWeights.__dataclass_fields__:
                raise InvalidInput(f"loss_weights.txt line {lineno}: cannot parse {line!r}")
            weights[key] = float(value)
    return LocalizerState(
        n_params=load_params(os.path.join(path, "n_branch.prm")),
        s_params=load_params(os.path.join(path, "s_branch.prm")),
        loss_weights=LossWeights(**weights),
    )
