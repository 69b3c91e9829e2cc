"""Minimal self-rendered SVG line charts (no plotting dependency).

Deterministic output: fixed float formatting, series drawn in the order
given, no timestamps. Vertical markers highlight event ticks (anomalies in
red, known changes in green, matching the benchmark's color language).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 900, 280
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 20, 28, 36
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


@dataclass
class LineSeries:
    label: str
    x: np.ndarray
    y: np.ndarray
    color: str | None = None


@dataclass
class Markers:
    anomaly_ticks: tuple[int, ...] = ()
    known_ticks: tuple[int, ...] = ()


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if not math.isfinite(lo) or not math.isfinite(hi) or lo == hi:
        return [lo]
    step = (hi - lo) / (n - 1)
    return [lo + step * i for i in range(n)]


def render_line_chart(series: list[LineSeries], title: str,
                      markers: Markers | None = None,
                      y_label: str = "") -> str:
    """Render one chart; NaN values break the polyline into segments."""
    xs = np.concatenate([s.x for s in series]) if series else np.array([0.0, 1.0])
    ys = np.concatenate([s.y[np.isfinite(s.y)] for s in series]) if series else np.array([0.0])
    if len(ys) == 0:
        ys = np.array([0.0])
    x_lo, x_hi = float(np.min(xs)), float(np.max(xs))
    y_lo, y_hi = float(np.min(ys)), float(np.max(ys))
    if x_lo == x_hi:
        x_hi = x_lo + 1.0
    if y_lo == y_hi:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        f'<text x="{MARGIN_L}" y="18" font-family="sans-serif" font-size="13" '
        f'fill="#222222">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#888888" stroke-width="1"/>',
    ]
    for t in _ticks(y_lo, y_hi):
        yy = py(t)
        parts.append(f'<line x1="{MARGIN_L}" y1="{_fmt(yy)}" x2="{WIDTH - MARGIN_R}" '
                     f'y2="{_fmt(yy)}" stroke="#dddddd" stroke-width="0.5"/>')
        parts.append(f'<text x="{MARGIN_L - 6}" y="{_fmt(yy + 3)}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="10" fill="#444444">'
                     f'{t:.3g}</text>')
    for t in _ticks(x_lo, x_hi, 6):
        xx = px(t)
        parts.append(f'<text x="{_fmt(xx)}" y="{HEIGHT - 14}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="10" fill="#444444">'
                     f'{t:.5g}</text>')
    if y_label:
        parts.append(f'<text x="14" y="{MARGIN_T + plot_h / 2}" font-family="sans-serif" '
                     f'font-size="11" fill="#444444" transform="rotate(-90 14 '
                     f'{MARGIN_T + plot_h / 2})" text-anchor="middle">{escape(y_label)}</text>')

    if markers:
        for tick in sorted(markers.known_ticks):
            if x_lo <= tick <= x_hi:
                xx = px(tick)
                parts.append(f'<line x1="{_fmt(xx)}" y1="{MARGIN_T}" x2="{_fmt(xx)}" '
                             f'y2="{MARGIN_T + plot_h}" stroke="#2ca02c" '
                             f'stroke-width="1" stroke-dasharray="4 3"/>')
        for tick in sorted(markers.anomaly_ticks):
            if x_lo <= tick <= x_hi:
                xx = px(tick)
                parts.append(f'<line x1="{_fmt(xx)}" y1="{MARGIN_T}" x2="{_fmt(xx)}" '
                             f'y2="{MARGIN_T + plot_h}" stroke="#d62728" '
                             f'stroke-width="1" stroke-dasharray="2 2"/>')

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        runs: list[list[str]] = [[]]
        for xv, yv in zip(s.x, s.y):
            if math.isfinite(yv):
                runs[-1].append(f"{_fmt(px(float(xv)))},{_fmt(py(float(yv)))}")
            elif runs[-1]:
                runs.append([])
        for run in runs:
            if len(run) >= 2:
                parts.append(f'<polyline points="{" ".join(run)}" fill="none" '
                             f'stroke="{color}" stroke-width="1.2"/>')
            elif len(run) == 1:
                parts.append(f'<circle cx="{run[0].split(",")[0]}" '
                             f'cy="{run[0].split(",")[1]}" r="1.5" fill="{color}"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_R - 4}" '
                     f'y="{MARGIN_T + 14 + 13 * i}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" fill="{color}">'
                     f'{escape(s.label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path: str, content: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n')
        fh.write(content)
        fh.write("\n")
