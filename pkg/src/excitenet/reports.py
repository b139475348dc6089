"""Self-contained SVG heatmap for fitted weight matrices.

Cells are emitted row-major (row = source process, column = target process,
matching the weight CSV order) with grayscale fills monotone in the weight:
larger weights render darker. Every cell also carries ``data-row``,
``data-col`` and ``data-weight`` attributes so tests can assert on values
instead of pixels.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

CELL = 44
PAD = 12
FONT = 12


def _shade(weight: float, w_max: float) -> str:
    frac = 0.0 if w_max <= 0 else max(0.0, min(1.0, weight / w_max))
    v = 255 - int(round(frac * 255))
    return f"rgb({v},{v},{v})"


def write_heatmap_svg(path: str | Path, labels: Sequence[str],
                      weights: np.ndarray, title: str | None = None) -> None:
    weights = np.asarray(weights, dtype=float)
    k = len(labels)
    if weights.shape != (k, k):
        raise ValueError("weights must be a K x K matrix matching the labels")
    w_max = float(weights.max()) if k else 0.0
    label_px = max((len(lb) for lb in labels), default=1) * (FONT - 4)
    left = PAD + label_px
    top = PAD + label_px + (FONT + 6 if title else 0)
    width = left + k * CELL + PAD
    height = top + k * CELL + PAD + FONT + 6

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<style>text{{font-family:sans-serif;font-size:{FONT}px;}}</style>',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{left}" y="{PAD + FONT}">{title}</text>')
    for j, lb in enumerate(labels):
        x = left + j * CELL + CELL // 2
        parts.append(
            f'<text x="{x}" y="{top - 6}" text-anchor="start" '
            f'transform="rotate(-55 {x} {top - 6})">{lb}</text>')
    for i, lb in enumerate(labels):
        y = top + i * CELL + CELL // 2 + FONT // 2
        parts.append(f'<text x="{left - 6}" y="{y}" text-anchor="end">{lb}</text>')
    for i in range(k):
        for j in range(k):
            x, y = left + j * CELL, top + i * CELL
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{_shade(weights[i, j], w_max)}" stroke="#888" '
                f'data-row="{labels[i]}" data-col="{labels[j]}" '
                f'data-weight="{weights[i, j]:.6f}"/>')
    parts.append(
        f'<text x="{left}" y="{top + k * CELL + PAD + FONT}">'
        f'weight direction: row process &#8594; column process</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
