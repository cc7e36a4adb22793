"""Minimal deterministic SVG heat map (one rect per cell, fixed color ramp)."""

from __future__ import annotations

import numpy as np

CELL = 26
MARGIN = 64
LOW = (247, 251, 255)
HIGH = (8, 48, 107)


def _color(value: float) -> str:
    value = min(1.0, max(0.0, value))
    channels = (round(lo + value * (hi - lo)) for lo, hi in zip(LOW, HIGH))
    return "#" + "".join(f"{c:02x}" for c in channels)


def heatmap_svg(matrix: np.ndarray, labels: list[str]) -> str:
    n = matrix.shape[0]
    width = MARGIN + n * CELL + 10
    height = MARGIN + n * CELL + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<style>text{font-family:monospace;font-size:10px;}</style>',
    ]
    peak = float(matrix.max()) or 1.0
    for i in range(n):
        for j in range(n):
            x, y = MARGIN + j * CELL, MARGIN + i * CELL
            parts.append(
                f'<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{_color(matrix[i, j] / peak)}" stroke="#ffffff" stroke-width="1">'
                f"<title>{labels[i]} to {labels[j]}: {matrix[i, j]:.6f}</title></rect>"
            )
    for k, label in enumerate(labels):
        parts.append(
            f'<text x="{MARGIN + k * CELL + 4}" y="{MARGIN - 6}" '
            f'transform="rotate(-45 {MARGIN + k * CELL + 4} {MARGIN - 6})">{label}</text>'
        )
        parts.append(f'<text x="4" y="{MARGIN + k * CELL + CELL // 2 + 4}">{label}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
