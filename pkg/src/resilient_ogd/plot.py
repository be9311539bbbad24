"""Minimal static SVG line charts."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50


def _ticks(lo: float, hi: float, k: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * i / (k - 1) for i in range(k)]


def render_svg(
    series: Mapping[str, Sequence[float]],
    x: Sequence[float] | None = None,
    logx: bool = False,
    title: str = "",
    xlabel: str = "T",
    ylabel: str = "",
) -> str:
    if not series or any(len(v) == 0 for v in series.values()):
        raise ValueError("need at least one nonempty series")
    n = max(len(v) for v in series.values())
    xs = list(x) if x is not None else list(range(1, n + 1))
    if logx and min(xs) <= 0:
        raise ValueError("log x axis needs positive x values")
    fx = (lambda v: math.log10(v)) if logx else float
    ys = [float(v) for s in series.values() for v in s if math.isfinite(v)]
    ylo, yhi = min(ys), max(ys)
    if yhi == ylo:
        ylo, yhi = ylo - 1, yhi + 1
    xlo, xhi = fx(min(xs)), fx(max(xs))
    if xhi == xlo:
        xhi = xlo + 1
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (fx(v) - xlo) / (xhi - xlo) * pw

    def py(v):
        return MARGIN_T + (yhi - v) / (yhi - ylo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#444"/>',
    ]
    for t in _ticks(ylo, yhi):
        y = py(t)
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{y:.2f}" x2="{MARGIN_L}" y2="{y:.2f}" stroke="#444"/>')
        out.append(f'<text x="{MARGIN_L - 6}" y="{y + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    for t in _ticks(xlo, xhi):
        xv = MARGIN_L + (t - xlo) / (xhi - xlo) * pw
        label = f"{10 ** t:.3g}" if logx else f"{t:.3g}"
        out.append(f'<line x1="{xv:.2f}" y1="{MARGIN_T + ph}" x2="{xv:.2f}" y2="{MARGIN_T + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{xv:.2f}" y="{MARGIN_T + ph + 16}" text-anchor="middle">{label}</text>')
    for k, (name, vals) in enumerate(series.items()):
        pts = " ".join(
            f"{px(xv):.2f},{py(float(v)):.2f}"
            for xv, v in zip(xs, vals)
            if math.isfinite(float(v))
        )
        color = COLORS[k % len(COLORS)]
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN_T + 14 + 16 * k
        lx = WIDTH - MARGIN_R - 170
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(name)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN_T + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + ph / 2})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(series: Mapping[str, Sequence[float]], path: str | Path, **kw) -> Path:
    path = Path(path)
    path.write_text(render_svg(series, **kw))
    return path
