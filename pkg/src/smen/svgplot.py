"""Plain SVG 1.1 line chart of per-class activation sequences."""

from xml.sax.saxutils import escape

import numpy as np

from .tensorseq import sigmoid

WIDTH, HEIGHT = 800, 300
MARGIN = 40
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def cas_svg(cas, mask=None, gt_spans=(), title=""):
    """Chart sigmoid(cas) for each action class over snippet index.

    ``mask`` (0/1 per snippet) is drawn as grey bands behind the lines and
    ``gt_spans`` as (start, end, class_id) bars under the axis.
    """
    probs = sigmoid(np.asarray(cas, dtype=np.float64)[:, :-1])
    T, C = probs.shape
    plot_w, plot_h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN
    step = plot_w / max(T - 1, 1)

    def x_at(t):
        return MARGIN + t * step

    def y_at(v):
        return MARGIN + (1.0 - v) * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{MARGIN}" y="{MARGIN - 12}" font-size="14" font-family="sans-serif">{escape(title)}</text>')
    if mask is not None:
        bits = np.asarray(mask).astype(bool)
        edges = np.flatnonzero(np.diff(np.concatenate([[0], bits.astype(int), [0]])))
        for s, e in zip(edges[::2], edges[1::2]):
            parts.append(f'<rect x="{x_at(s) - step / 2:.2f}" y="{MARGIN}" width="{(e - s) * step:.2f}" '
                         f'height="{plot_h}" fill="#dddddd"/>')
    parts.append(f'<line x1="{MARGIN}" y1="{y_at(0)}" x2="{MARGIN + plot_w}" y2="{y_at(0)}" stroke="black"/>')
    parts.append(f'<line x1="{MARGIN}" y1="{y_at(0)}" x2="{MARGIN}" y2="{y_at(1)}" stroke="black"/>')
    for v in (0.0, 0.5, 1.0):
        parts.append(f'<text x="{MARGIN - 6}" y="{y_at(v) + 4:.2f}" font-size="10" text-anchor="end" '
                     f'font-family="sans-serif">{v:.1f}</text>')
    for c in range(C):
        pts = " ".join(f"{x_at(t):.2f},{y_at(v):.2f}" for t, v in enumerate(probs[:, c]))
        parts.append(f'<polyline fill="none" stroke="{COLORS[c % len(COLORS)]}" stroke-width="1.5" '
                     f'points="{pts}"><title>class {c}</title></polyline>')
    for s, e, c in gt_spans:
        parts.append(f'<rect x="{x_at(s):.2f}" y="{y_at(0) + 6:.2f}" width="{(e - s) * step:.2f}" height="6" '
                     f'fill="{COLORS[int(c) % len(COLORS)]}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
