"""Static SVG charts of loss and epsilon-rank trajectories.

Loss is drawn as a line on a log10 left axis, epsilon-rank as a scatter on
a linear right axis. Output depends only on the input records: no
timestamps, fixed number formatting, fixed element order.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

__all__ = ["render_svg", "write_svg"]

WIDTH, HEIGHT = 720, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 70, 30, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _num(v):
    return f"{v:.2f}"


def _nice_ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 10))
        t += step
    return ticks


def render_svg(series, title="loss and epsilon-rank"):
    """SVG text for ``series``: a list of ``(label, records)`` pairs.

    Records need ``iteration``, ``loss`` and ``eps_rank`` attributes; ranks
    below zero (not measured) are not drawn.
    """
    if not series or not any(recs for _, recs in series):
        raise ValueError("nothing to plot")
    its = [r.iteration for _, recs in series for r in recs]
    logs = [math.log10(r.loss) for _, recs in series for r in recs if r.loss > 0 and math.isfinite(r.loss)]
    ranks = [r.eps_rank for _, recs in series for r in recs if r.eps_rank >= 0]
    x0, x1 = min(its), max(its)
    if x1 == x0:
        x1 = x0 + 1
    y0, y1 = (math.floor(min(logs)), math.ceil(max(logs))) if logs else (-1, 0)
    if y1 == y0:
        y1 = y0 + 1
    r1 = max(ranks) if ranks else 1
    r1 = max(1, r1)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    def sr(v):
        return TOP + ph - v / r1 * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _nice_ticks(x0, x1):
        x = _num(sx(t))
        out.append(f'<line x1="{x}" y1="{TOP + ph}" x2="{x}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 18}" text-anchor="middle">{int(t)}</text>')
    for e in range(y0, y1 + 1):
        y = _num(sy(e))
        out.append(f'<line x1="{LEFT - 5}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">1e{e}</text>')
    for t in _nice_ticks(0, r1):
        y = _num(sr(t))
        out.append(f'<line x1="{LEFT + pw}" y1="{y}" x2="{LEFT + pw + 5}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{LEFT + pw + 8}" y="{y}" dominant-baseline="middle">{int(t)}</text>')
    out.append(f'<text x="{LEFT + pw // 2}" y="{HEIGHT - 10}" text-anchor="middle">iteration</text>')
    out.append(f'<text x="16" y="{TOP + ph // 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph // 2})">loss (log10)</text>')
    out.append(f'<text x="{WIDTH - 14}" y="{TOP + ph // 2}" text-anchor="middle" '
               f'transform="rotate(90 {WIDTH - 14} {TOP + ph // 2})">epsilon-rank</text>')

    for k, (label, recs) in enumerate(series):
        color = COLORS[k % len(COLORS)]
        pts = [f"{_num(sx(r.iteration))},{_num(sy(math.log10(r.loss)))}"
               for r in recs if r.loss > 0 and math.isfinite(r.loss)]
        if pts:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        for r in recs:
            if r.eps_rank >= 0:
                out.append(f'<circle cx="{_num(sx(r.iteration))}" cy="{_num(sr(r.eps_rank))}" r="2.5" '
                           f'fill="{color}" fill-opacity="0.6"/>')
        ly = TOP + 14 + 16 * k
        lx = LEFT + pw - 150
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<circle cx="{lx + 10}" cy="{ly}" r="2.5" fill="{color}"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(series, path, title="loss and epsilon-rank"):
    text = render_svg(series, title)
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return text
