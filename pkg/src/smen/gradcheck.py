"""Central finite-difference check of the analytic backbone gradients."""

from dataclasses import dataclass, replace

import numpy as np

from .backbone import MATRIX_FIELDS, forward, init_params
from .losses import LossWeights, backward, total_loss
from .tensorseq import VideoLabel

STEP = 1e-6
REL_TOL = 1e-4
# gradients below this magnitude are compared on an absolute scale
REL_FLOOR = 1e-5


@dataclass
class GradCheckResult:
    cases: int
    entries: int
    worst_rel_error: float
    worst_where: str

    @property
    def passed(self):
        return self.worst_rel_error <= REL_TOL


def relative_error(a, b):
    return abs(a - b) / max(abs(a), abs(b), REL_FLOOR)


def random_case(rng, T, d=4, h=6, C=3, context_radius=1):
    p = init_params(d, h, C, context_radius, seed=int(rng.integers(1 << 31)))
    p = replace(p, embed_b=rng.normal(scale=0.3, size=h), cls_b=rng.normal(scale=0.5, size=C + 1),
                attn_b=rng.normal(scale=0.5, size=3))
    x = rng.normal(size=(T, d))
    n_pos = int(rng.integers(1, C + 1))
    label = VideoLabel.from_classes(rng.choice(C, size=n_pos, replace=False), C)
    return p, x, label


def check_case(params, x, label, weights, topk_ratio=0.5, feat_scale=1.0, step=STEP):
    """Worst relative error over every parameter entry of one case."""
    _, grads = backward(params, forward(params, x), label, weights, topk_ratio, feat_scale)
    worst, where, n = 0.0, "", 0
    for name in MATRIX_FIELDS:
        arr = getattr(params, name)
        g = getattr(grads, name)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + step
            lp = total_loss(forward(params, x), label, weights, topk_ratio, feat_scale)
            arr[idx] = old - step
            lm = total_loss(forward(params, x), label, weights, topk_ratio, feat_scale)
            arr[idx] = old
            err = relative_error((lp - lm) / (2 * step), g[idx])
            n += 1
            if err > worst:
                worst, where = err, f"{name}{list(idx)}"
    return worst, where, n


def run(seed=0, n_cases=20, lengths=(1, 3, 8), weights=LossWeights()):
    rng = np.random.default_rng(seed)
    worst, where, total = 0.0, "", 0
    for i in range(n_cases):
        T = lengths[i % len(lengths)]
        p, x, label = random_case(rng, T)
        err, loc, n = check_case(p, x, label, weights)
        total += n
        if err > worst:
            worst, where = err, f"case {i} (T={T}) {loc}"
    return GradCheckResult(n_cases, total, worst, where)
