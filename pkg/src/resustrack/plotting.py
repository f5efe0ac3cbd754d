"""Deterministic SVG rendering of post-processing stage timelines.

The renderer is a small hand-rolled SVG writer so repeated runs on the
same data produce byte-identical files. Frame index runs along the
horizontal axis, position (or count) along the vertical; one polyline
per stage, broken at absent frames.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

STAGE_COLORS = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")

_MARGIN_LEFT = 52.0
_MARGIN_RIGHT = 14.0
_MARGIN_TOP = 22.0
_MARGIN_BOTTOM = 34.0


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _runs(values: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous index ranges of finite samples."""
    finite = np.isfinite(values)
    runs = []
    start = None
    for i, ok in enumerate(finite):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            runs.append((start, i))
            start = None
    if start is not None:
        runs.append((start, len(values)))
    return runs


def render_timeline_plot(
    stages: Mapping[str, Sequence[float]],
    title: str = "",
    width: int = 880,
    height: int = 340,
) -> str:
    """Render stage timelines to an SVG document string.

    Stages are drawn in mapping order with a fixed palette. Empty or
    all-absent input yields a plot with axes only.
    """
    arrays = {name: np.asarray(vals, dtype=np.float64) for name, vals in stages.items()}
    n = max((len(a) for a in arrays.values()), default=0)
    finite_vals = [v for a in arrays.values() for v in a[np.isfinite(a)]]

    plot_w = width - _MARGIN_LEFT - _MARGIN_RIGHT
    plot_h = height - _MARGIN_TOP - _MARGIN_BOTTOM

    if finite_vals:
        vmin, vmax = min(finite_vals), max(finite_vals)
        if vmin == vmax:
            vmin, vmax = vmin - 1.0, vmax + 1.0
        pad = 0.05 * (vmax - vmin)
        vmin, vmax = vmin - pad, vmax + pad
    else:
        vmin, vmax = 0.0, 1.0

    def sx(i: float) -> float:
        if n <= 1:
            return _MARGIN_LEFT
        return _MARGIN_LEFT + plot_w * i / (n - 1)

    def sy(v: float) -> float:
        return _MARGIN_TOP + plot_h * (vmax - v) / (vmax - vmin)

    parts = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">')
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    if title:
        parts.append(
            f'<text x="{_fmt(width / 2)}" y="14" font-family="sans-serif" '
            f'font-size="12" text-anchor="middle">{title}</text>')

    # axes
    x0, y0 = _MARGIN_LEFT, _MARGIN_TOP + plot_h
    x1, y1 = _MARGIN_LEFT + plot_w, _MARGIN_TOP
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" '
        f'stroke="black" stroke-width="1"/>')
    parts.append(
        f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" '
        f'stroke="black" stroke-width="1"/>')
    parts.append(
        f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(height - 8.0)}" '
        f'font-family="sans-serif" font-size="11" text-anchor="middle">frame</text>')
    if n > 0:
        parts.append(
            f'<text x="{_fmt(x0)}" y="{_fmt(height - 20.0)}" '
            f'font-family="sans-serif" font-size="10" text-anchor="middle">0</text>')
        parts.append(
            f'<text x="{_fmt(x1)}" y="{_fmt(height - 20.0)}" '
            f'font-family="sans-serif" font-size="10" text-anchor="middle">{n - 1}</text>')
    if finite_vals:
        parts.append(
            f'<text x="{_fmt(x0 - 6.0)}" y="{_fmt(y0)}" font-family="sans-serif" '
            f'font-size="10" text-anchor="end">{_fmt(vmin)}</text>')
        parts.append(
            f'<text x="{_fmt(x0 - 6.0)}" y="{_fmt(y1 + 8.0)}" font-family="sans-serif" '
            f'font-size="10" text-anchor="end">{_fmt(vmax)}</text>')

    for k, (name, values) in enumerate(arrays.items()):
        color = STAGE_COLORS[k % len(STAGE_COLORS)]
        for start, end in _runs(values):
            if end - start == 1:
                parts.append(
                    f'<circle cx="{_fmt(sx(start))}" cy="{_fmt(sy(values[start]))}" '
                    f'r="1.6" fill="{color}" data-stage="{name}"/>')
                continue
            points = " ".join(
                f"{_fmt(sx(i))},{_fmt(sy(values[i]))}" for i in range(start, end))
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.2" '
                f'data-stage="{name}" points="{points}"/>')
        # legend entry
        lx = _MARGIN_LEFT + plot_w - 110.0
        ly = _MARGIN_TOP + 6.0 + 14.0 * k
        parts.append(
            f'<rect x="{_fmt(lx)}" y="{_fmt(ly - 8.0)}" width="10" height="10" '
            f'fill="{color}"/>')
        parts.append(
            f'<text x="{_fmt(lx + 14.0)}" y="{_fmt(ly + 1.0)}" '
            f'font-family="sans-serif" font-size="11">{name}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
