"""A very small SVG line-plot writer (polylines, axes, ticks, legend)."""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step) + 1)]


def line_plot(path, series: Sequence[tuple[str, Sequence[float], Sequence[float]]], title: str = "",
              xlabel: str = "t", ylabel: str = "", logy: bool = False, width: int = 640, height: int = 420):
    """Write ``series`` of ``(label, xs, ys)`` to ``path``; non-positive values are dropped on a log axis."""
    ml, mr, mt, mb = 70, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    tf = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = []
    for label, xs, ys in series:
        keep = [(float(x), tf(float(y))) for x, y in zip(xs, ys)
                if math.isfinite(float(y)) and (not logy or float(y) > 0)]
        pts.append((label, keep))
    allx = [x for _, p in pts for x, _ in p] or [0.0, 1.0]
    ally = [y for _, p in pts for _, y in p] or [0.0, 1.0]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return mt + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.1f}" y1="{mt + ph}" x2="{sx(t):.1f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{mt + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        lab = f"1e{t:g}" if logy else f"{t:g}"
        out.append(f'<line x1="{ml - 5}" y1="{sy(t):.1f}" x2="{ml}" y2="{sy(t):.1f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{sy(t) + 4:.1f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2:.1f})">{escape(ylabel)}{" (log10)" if logy else ""}</text>')
    for i, (label, p) in enumerate(pts):
        color = _COLORS[i % len(_COLORS)]
        if p:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in p)
            dash = ' stroke-dasharray="6,4"' if i > 0 else ""
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{coords}"/>')
        ly = mt + 15 + 15 * i
        out.append(f'<line x1="{ml + pw - 150}" y1="{ly}" x2="{ml + pw - 125}" y2="{ly}" stroke="{color}"/>')
        out.append(f'<text x="{ml + pw - 120}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>\n")
    Path(path).write_text("\n".join(out))
