"""Adam optimisation loop over whole-video batches."""

from contextlib import contextmanager
from dataclasses import dataclass, field, replace
import logging
import os

import numpy as np

from .backbone import MATRIX_FIELDS, forward, save_params
from .losses import backward
from .mining import apply_mask
from .tensorseq import InvalidInput

log = logging.getLogger(__name__)


class NumericFailure(RuntimeError):
    """Loss or gradient became non-finite during training."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    iterations: int = 500
    batch_size: int = 8
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    topk_ratio: float = 1 / 8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InvalidInput("learning_rate must be positive")
        if self.iterations < 0 or self.batch_size < 1:
            raise InvalidInput("iterations must be >= 0 and batch_size >= 1")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1 and self.adam_eps > 0):
            raise InvalidInput("invalid Adam constants")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0


def adam_step(params, grads, state, cfg):
    """One bias-corrected Adam update. Returns new params and new state."""
    t = state.step + 1
    new_m, new_v, new_arrays = {}, {}, {}
    for name in MATRIX_FIELDS:
        g = getattr(grads, name)
        m = cfg.adam_beta1 * state.m.get(name, 0.0) + (1 - cfg.adam_beta1) * g
        v = cfg.adam_beta2 * state.v.get(name, 0.0) + (1 - cfg.adam_beta2) * g * g
        m_hat = m / (1 - cfg.adam_beta1 ** t)
        v_hat = v / (1 - cfg.adam_beta2 ** t)
        new_arrays[name] = getattr(params, name) - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        new_m[name], new_v[name] = m, v
    return replace(params, **new_arrays), AdamState(new_m, new_v, t)


def batch_schedule(n_videos, cfg):
    """Deterministic per-iteration video index batches (reshuffled each epoch)."""
    rng = np.random.default_rng(cfg.seed)
    order = []
    for _ in range(cfg.iterations):
        batch = []
        while len(batch) < min(cfg.batch_size, n_videos):
            if not order:
                order = list(rng.permutation(n_videos))
            batch.append(order.pop())
        yield batch


def mean_gradients(grad_list):
    """Average gradients in the fixed list order (deterministic reduction)."""
    first = grad_list[0]
    out = {}
    for name in MATRIX_FIELDS:
        acc = np.zeros_like(getattr(first, name))
        for g in grad_list:
            acc += getattr(g, name)
        out[name] = acc / len(grad_list)
    return replace(first, **out)


@contextmanager
def numeric_guard(it, video_id):
    """Turn floating-point overflow or invalid operations into NumericFailure."""
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            yield
    except FloatingPointError as exc:
        raise NumericFailure(f"{exc} at iteration {it}, video {video_id}") from None


def _check_finite(loss, it, video_id):
    if not np.isfinite(loss):
        raise NumericFailure(f"non-finite loss {loss} at iteration {it}, video {video_id}")


def _check_params(params, it):
    for name in MATRIX_FIELDS:
        if not np.all(np.isfinite(getattr(params, name))):
            raise NumericFailure(f"non-finite {name} after iteration {it}")


def train(params, corpus, loss_weights, cfg, mask_source=None, run_dir=None, transform=None):
    """Train one backbone on ``corpus`` (a list of SynthVideo-like records).

    ``mask_source`` maps video id to a SlowMask applied to the features
    before every forward pass. ``transform`` optionally rewrites each
    feature sequence (the miner uses it for sub-sampling).
    Returns ``(params, loss_curve)``.
    """
    if not corpus:
        raise InvalidInput("cannot train on an empty corpus")
    inputs = []
    for video in corpus:
        x = video.features
        if mask_source is not None:
            x = apply_mask(x, mask_source[video.video_id])
        if transform is not None:
            x = transform(x)
        inputs.append(x)

    state = AdamState()
    curve = []
    for it, batch in enumerate(batch_schedule(len(corpus), cfg)):
        losses, grads = [], []
        for i in batch:
            with numeric_guard(it, corpus[i].video_id):
                out = forward(params, inputs[i])
                loss, g = backward(params, out, corpus[i].label, loss_weights, cfg.topk_ratio)
            _check_finite(loss, it, corpus[i].video_id)
            losses.append(loss)
            grads.append(g)
        params, state = adam_step(params, mean_gradients(grads), state, cfg)
        _check_params(params, it)
        curve.append(float(np.mean(losses)))

    if run_dir is not None:
        write_run(run_dir, params, curve, cfg, loss_weights)
    return params, curve


def write_config(path, **sections):
    with open(path, "w") as f:
        for prefix, obj in sections.items():
            items = obj.items() if isinstance(obj, dict) else vars(obj).items()
            for k, v in items:
                f.write(f"{prefix}.{k}={v}\n")


def write_curve(path, curve):
    with open(path, "w") as f:
        f.write("iteration,loss\n")
        for i, loss in enumerate(curve):
            f.write(f"{i},{loss!r}\n")


def write_run(run_dir, params, curve, cfg, loss_weights, name="params.prm"):
    os.makedirs(run_dir, exist_ok=True)
    write_config(os.path.join(run_dir, "config.txt"), train=cfg, loss=loss_weights)
    write_curve(os.path.join(run_dir, "loss_curve.csv"), curve)
    save_params(os.path.join(run_dir, name), params)
    log.info("wrote run to %s", run_dir)
