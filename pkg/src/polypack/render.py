"""SVG 1.1 pictures of 2D periodic packings.

The unit cell is drawn with its eight neighbouring images. Bodies are
grouped into levels by size, largest first, and each finer level gets a
lighter tone so a multi-scale fill can be audited by eye.
"""
from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .geometry import BALL, BOX, diameter
from .packing import PeriodicPacking

TONES = ("#1f3b73", "#3d6bb3", "#7aa0d6", "#b3c9ea", "#dae5f5")
# Beyond this many shapes the finest levels are left out of the picture.
MAX_SHAPES = 200_000


def _levels(packing: PeriodicPacking) -> np.ndarray:
    """Level index per body: 0 for the largest diameter, increasing as bodies shrink."""
    if not packing.bodies:
        return np.zeros(0, dtype=int)
    diam = np.array([round(diameter(b), 12) for b in packing.bodies])
    uniq = np.unique(diam)[::-1]
    return np.searchsorted(-uniq, -diam)


def render_svg(packing: PeriodicPacking, width: float = 800.0, max_shapes: int = MAX_SHAPES) -> str:
    if packing.n != 2:
        raise ValueError("only 2D packings can be rendered")
    px, py = packing.period
    span_x, span_y = 3 * px, 3 * py
    s = width / span_x
    height = span_y * s
    level = _levels(packing)
    nlev = int(level.max()) + 1 if len(level) else 0
    counts = [int(np.sum(level[packing.body_ref] == k)) * 9 for k in range(nlev)]
    shown = 0
    total = 0
    for k in range(nlev):
        if total + counts[k] > max_shapes and k > 0:
            break
        total += counts[k]
        shown = k + 1

    def X(x):
        return (x + px) * s

    def Y(y):
        return height - (y + py) * s

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width:.1f}" '
        f'height="{height:.1f}" viewBox="0 0 {width:.4f} {height:.4f}">',
        '<rect x="0" y="0" width="100%" height="100%" fill="white"/>',
    ]
    if shown < nlev:
        out.append(f"<!-- {nlev - shown} finest level(s) omitted to stay under {max_shapes} shapes -->")
    centers = packing.translations
    for k in range(shown):
        tone = TONES[min(k, len(TONES) - 1)]
        out.append(f'<g fill="{tone}" stroke="none">')
        for b_idx in np.nonzero(level == k)[0]:
            body = packing.bodies[b_idx]
            sel = centers[packing.body_ref == b_idx]
            for dx in (-1, 0, 1):
                for dy in (-1, 0, 1):
                    t = sel + np.array([dx * px, dy * py])
                    if body.kind == BALL:
                        c = t + np.array(body.center)
                        r = body.radius * s
                        out.extend(f'<circle cx="{X(x):.4f}" cy="{Y(y):.4f}" r="{r:.4f}"/>'
                                   for x, y in c)
                    elif body.kind == BOX:
                        lo = t + np.array(body.lo)
                        w, h = (np.array(body.hi) - np.array(body.lo)) * s
                        out.extend(f'<rect x="{X(x):.4f}" y="{Y(y) - h:.4f}" '
                                   f'width="{w:.4f}" height="{h:.4f}"/>' for x, y in lo)
        out.append("</g>")
    out.append(f'<rect x="{X(0):.4f}" y="{Y(py):.4f}" width="{px * s:.4f}" height="{py * s:.4f}" '
               'fill="none" stroke="#c0392b" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(packing: PeriodicPacking, path: Union[str, Path], **kw) -> None:
    Path(path).write_text(render_svg(packing, **kw))
