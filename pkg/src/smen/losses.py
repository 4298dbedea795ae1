"""Training objectives for the backbone and their analytic gradients.

The classification loss supervises three attention-weighted CAS streams
(instance, context, background) with fixed branch targets. The three
auxiliary terms are compact stand-ins with the same roles:

guide
    mean |attn_bac - p_bg| where p_bg is the CAS softmax background mass.
feature separation
    hinge on pairwise distances between unit-normalized, attention-pooled
    embeddings of the three branches.
sparsity
    mean instance attention.

Every term has a hand-written gradient so training needs nothing beyond
numpy; ``backward`` returns gradients with the same layout as
:class:`~smen.backbone.BackboneParams`.
"""

from dataclasses import dataclass

import numpy as np

from .backbone import BAC, CON, INS, BackboneParams, topk_columns, topk_count
from .tensorseq import InvalidInput, softmax

PROB_CLAMP = 1e-12
POOL_EPS = 1e-8


@dataclass(frozen=True)
class LossWeights:
    lambda1: float = 1.0  # guide
    lambda2: float = 0.1  # feature separation
    lambda3: float = 0.1  # sparsity
    beta: float = 0.5
    margin: float = 1.0

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise InvalidInput("loss weights must be non-negative")
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidInput("beta must lie in [0, 1]")
        if not self.margin > 0:
            raise InvalidInput("margin must be positive")


def branch_targets(label):
    """Targets for the instance, context and background streams."""
    y = np.asarray(label.y if hasattr(label, "y") else label, dtype=np.float64)
    y_ins = y.copy()
    y_ins[-1] = 0.0
    y_con = y.copy()
    y_con[-1] = 1.0
    y_bac = np.zeros_like(y)
    y_bac[-1] = 1.0
    return y_ins, y_con, y_bac


def bce(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise InvalidInput(f"bce length mismatch: {pred.shape} vs {target.shape}")
    p = np.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return float(-np.mean(target * np.log(p) + (1.0 - target) * np.log(1.0 - p)))


def _bce_grad(pred, target):
    p = np.clip(pred, PROB_CLAMP, 1.0 - PROB_CLAMP)
    g = -(target / p - (1.0 - target) / (1.0 - p)) / pred.size
    g[(pred < PROB_CLAMP) | (pred > 1.0 - PROB_CLAMP)] = 0.0
    return g


def _softmax_backward(p, dp, axis=-1):
    return p * (dp - np.sum(dp * p, axis=axis, keepdims=True))


def _branch_classification(cas, attn, b, target, k):
    """Loss for one attention-weighted stream plus d/dcas and d/dattn[:, b]."""
    wc = attn[:, b:b + 1] * cas
    idx = topk_columns(wc, k)
    pooled = np.take_along_axis(wc, idx, axis=0).mean(axis=0)
    p = softmax(pooled)
    loss = bce(p, target)

    dpooled = _softmax_backward(p, _bce_grad(p, target))
    dwc = np.zeros_like(wc)
    np.put_along_axis(dwc, idx, np.broadcast_to(dpooled / k, idx.shape), axis=0)
    dcas = attn[:, b:b + 1] * dwc
    dattn_b = np.sum(dwc * cas, axis=1)
    return loss, dcas, dattn_b


def classification_loss(out, label, topk_ratio=1 / 8):
    return _classification(out.cas, out.attn, label, topk_ratio)[0]


def _classification(cas, attn, label, topk_ratio):
    k = topk_count(cas.shape[0], topk_ratio)
    total = 0.0
    dcas = np.zeros_like(cas)
    dattn = np.zeros_like(attn)
    for b, target in zip((INS, CON, BAC), branch_targets(label)):
        loss, dc, da = _branch_classification(cas, attn, b, target, k)
        total += loss
        dcas += dc
        dattn[:, b] += da
    return total, dcas, dattn


def guide_loss(cas, attn):
    return _guide(np.asarray(cas, dtype=np.float64), np.asarray(attn, dtype=np.float64))[0]


def _guide(cas, attn):
    P = softmax(cas, axis=1)
    diff = attn[:, BAC] - P[:, -1]
    T = cas.shape[0]
    loss = float(np.mean(np.abs(diff)))
    sgn = np.sign(diff) / T
    dattn = np.zeros_like(attn)
    dattn[:, BAC] = sgn
    # d p_bg / d cas_row = p_bg * (onehot_bg - P_row)
    onehot = np.zeros(cas.shape[1])
    onehot[-1] = 1.0
    dcas = (-sgn * P[:, -1])[:, None] * (onehot[None, :] - P)
    return loss, dcas, dattn


def _pooled_unit_features(embedded, attn):
    den = attn.sum(axis=0) + POOL_EPS  # 3
    num = attn.T @ embedded  # 3 x h
    f = num / den[:, None]
    norms = np.linalg.norm(f, axis=1)
    g = np.divide(f, norms[:, None], out=np.zeros_like(f), where=norms[:, None] > 0)
    return num, den, norms, g


PAIRS = ((INS, CON), (INS, BAC), (CON, BAC))


def feature_separation_loss(embedded, attn, margin=1.0):
    return _feature_separation(np.asarray(embedded, dtype=np.float64),
                               np.asarray(attn, dtype=np.float64), margin)[0]


def _feature_separation(embedded, attn, margin):
    num, den, norms, g = _pooled_unit_features(embedded, attn)
    loss = 0.0
    dg = np.zeros_like(g)
    for a, b in PAIRS:
        diff = g[a] - g[b]
        dist = np.linalg.norm(diff)
        gap = margin - dist
        if gap > 0:
            loss += gap
            if dist > 0:
                dg[a] -= diff / dist
                dg[b] += diff / dist
    # back through unit normalization, then through the attention-weighted mean
    df = np.zeros_like(g)
    live = norms > 0
    df[live] = (dg[live] - g[live] * np.sum(g[live] * dg[live], axis=1, keepdims=True)) / norms[live, None]
    dnum = df / den[:, None]
    dden = -np.sum(df * num, axis=1) / den ** 2
    de = attn @ dnum
    dattn = embedded @ dnum.T + dden[None, :]
    return float(loss), de, dattn


def sparsity_loss(attn):
    attn = np.asarray(attn, dtype=np.float64)
    return float(np.mean(attn[:, INS]))


def fused_feature_loss(l_feat_normal, l_feat_slow, beta=0.5):
    if not 0.0 <= beta <= 1.0:
        raise InvalidInput("beta must lie in [0, 1]")
    if beta == 0.0:
        return l_feat_normal
    if beta == 1.0:
        return l_feat_slow
    return (1.0 - beta) * l_feat_normal + beta * l_feat_slow


def loss_terms(out, label, weights, topk_ratio=1 / 8):
    return {
        "cls": classification_loss(out, label, topk_ratio),
        "gui": guide_loss(out.cas, out.attn),
        "feat": feature_separation_loss(out.embedded, out.attn, weights.margin),
        "spa": sparsity_loss(out.attn),
    }


def total_loss(out, label, weights, topk_ratio=1 / 8, feat_scale=1.0):
    """Classification plus weighted auxiliaries.

    ``feat_scale`` multiplies the feature-separation weight; the two-branch
    localizer uses it to apply the (1 - beta) / beta split.
    """
    t = loss_terms(out, label, weights, topk_ratio)
    return (t["cls"] + weights.lambda1 * t["gui"]
            + feat_scale * weights.lambda2 * t["feat"] + weights.lambda3 * t["spa"])


def backward(params, out, label, weights, topk_ratio=1 / 8, feat_scale=1.0):
    """Gradient of :func:`total_loss` with respect to every parameter array.

    Top-k pooling routes gradient only to the selected snippets, ties going
    to the lowest index. Returns ``(loss, grads)`` with ``grads`` shaped like
    ``params``.
    """
    cas, attn, e = out.cas, out.attn, out.embedded
    T = cas.shape[0]

    loss, dcas, dattn = _classification(cas, attn, label, topk_ratio)
    de = np.zeros_like(e)

    if weights.lambda1:
        l_gui, dc, da = _guide(cas, attn)
        loss += weights.lambda1 * l_gui
        dcas += weights.lambda1 * dc
        dattn += weights.lambda1 * da

    w_feat = feat_scale * weights.lambda2
    if w_feat:
        l_feat, de_f, da = _feature_separation(e, attn, weights.margin)
        loss += w_feat * l_feat
        de += w_feat * de_f
        dattn += w_feat * da

    if weights.lambda3:
        loss += weights.lambda3 * float(np.mean(attn[:, INS]))
        dattn[:, INS] += weights.lambda3 / T

    dlogit = _softmax_backward(attn, dattn, axis=1)
    de += dcas @ params.cls_w.T + dlogit @ params.attn_w.T
    dz = de * (out.pre_relu > 0)

    grads = BackboneParams(
        embed_w=out.window_mean.T @ dz,
        embed_b=dz.sum(axis=0),
        cls_w=e.T @ dcas,
        cls_b=dcas.sum(axis=0),
        attn_w=e.T @ dlogit,
        attn_b=dlogit.sum(axis=0),
        context_radius=params.context_radius,
    )
    return float(loss), grads
