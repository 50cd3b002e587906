"""Top-down SVG plot of ground-truth and predicted camera paths."""
from __future__ import annotations

import numpy as np

SIZE = 600
MARGIN = 30
MARKER_HALF = 8


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def emit_path_svg(report) -> str:
    """Ground truth in red, prediction in blue, grey ticks where a new sequence starts.

    ``report`` needs ``truth`` and ``pred`` arrays (``(N, >=2)``, x/y first)
    and ``sequence_starts``, a list of row indices.
    """
    truth = np.asarray(report.truth, dtype=np.float64)[:, :2]
    pred = np.asarray(report.pred, dtype=np.float64)[:, :2]
    if len(truth) == 0:
        raise ValueError("report has no frames")
    both = np.vstack([truth, pred])
    lo, hi = both.min(axis=0), both.max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-9))
    scale = (SIZE - 2 * MARGIN) / span

    def to_px(xy):
        x = MARGIN + (xy[:, 0] - lo[0]) * scale
        y = SIZE - MARGIN - (xy[:, 1] - lo[1]) * scale
        return np.stack([x, y], axis=1)

    t_px, p_px = to_px(truth), to_px(pred)
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
    ]
    for k in report.sequence_starts:
        x, y = t_px[k]
        lines.append(f'<line class="sequence-start" x1="{_fmt(x)}" y1="{_fmt(y - MARKER_HALF)}" '
                     f'x2="{_fmt(x)}" y2="{_fmt(y + MARKER_HALF)}" stroke="grey" stroke-width="1"/>')
    for cls, colour, px in (("truth", "red", t_px), ("prediction", "blue", p_px)):
        if len(px) == 1:
            lines.append(f'<circle class="{cls}" cx="{_fmt(px[0, 0])}" cy="{_fmt(px[0, 1])}" '
                         f'r="2" fill="{colour}"/>')
        else:
            pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in px)
            lines.append(f'<polyline class="{cls}" points="{pts}" fill="none" '
                         f'stroke="{colour}" stroke-width="1.5"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
