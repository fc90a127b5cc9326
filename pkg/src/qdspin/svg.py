"""Minimal self-contained SVG line plots and heatmaps."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=78, right=24, top=36, bottom=58)
HEAT_BAR = 70  # room for the colour bar


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    return [first + i * step for i in range(int((hi - first) / step + 1e-9) + 1)]


def _fmt(v):
    return f"{v:.4g}"


def _frame(x0, y0, x1, y1, xr, yr, xlabel, ylabel, title):
    sx = lambda v: x0 + (v - xr[0]) / (xr[1] - xr[0]) * (x1 - x0)
    sy = lambda v: y1 - (v - yr[0]) / (yr[1] - yr[0]) * (y1 - y0)
    out = [f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" '
           'fill="none" stroke="#000"/>']
    for t in _ticks(*xr):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{y1}" x2="{x:.2f}" y2="{y1 + 5}" stroke="#000"/>')
        out.append(f'<text x="{x:.2f}" y="{y1 + 19}" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(*yr):
        y = sy(t)
        out.append(f'<line x1="{x0 - 5}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="#000"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end">{_fmt(t)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{y1 + 44}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text transform="translate({x0 - 60},{(y0 + y1) / 2}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{(x0 + x1) / 2}" y="{y0 - 14}" text-anchor="middle">'
                   f'{escape(title)}</text>')
    return out, sx, sy


def _document(width, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{HEIGHT}" '
            f'viewBox="0 0 {width} {HEIGHT}" font-family="sans-serif" font-size="12">\n'
            f'<rect width="100%" height="100%" fill="#fff"/>\n' + "\n".join(body) + "\n</svg>\n")


def _range(v):
    lo, hi = float(np.nanmin(v)), float(np.nanmax(v))
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def line_plot(x, y, xlabel: str, ylabel: str, title: str = "") -> str:
    x, y = np.asarray(x, float), np.asarray(y, float)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("x and y must be non-empty and equally long")
    x0, y0 = MARGIN["left"], MARGIN["top"]
    x1, y1 = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    body, sx, sy = _frame(x0, y0, x1, y1, _range(x), _range(y), xlabel, ylabel, title)
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y) if np.isfinite(b))
    body.append(f'<polyline points="{pts}" fill="none" stroke="#1f5fa8" stroke-width="1.5"/>')
    return _document(WIDTH, body)


def _colour(u):
    # dark blue -> teal -> yellow
    stops = ((0.0, (40, 20, 90)), (0.5, (30, 150, 140)), (1.0, (250, 230, 40)))
    if not np.isfinite(u):
        return "#888"
    for (a, ca), (b, cb) in zip(stops[:-1], stops[1:]):
        if u <= b:
            w = (u - a) / (b - a)
            r, g, bl = (round(p + w * (q - p)) for p, q in zip(ca, cb))
            return f"#{r:02x}{g:02x}{bl:02x}"
    return "#%02x%02x%02x" % stops[-1][1]


def heatmap(x, y, z, xlabel: str, ylabel: str, zlabel: str, title: str = "") -> str:
    """``z[i, j]`` is drawn at ``(x[j], y[i])`` on a regular grid."""
    x, y, z = np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)
    if z.shape != (y.size, x.size):
        raise ValueError("z must have shape (len(y), len(x))")
    width = WIDTH + HEAT_BAR
    x0, y0 = MARGIN["left"], MARGIN["top"]
    x1, y1 = WIDTH - MARGIN["right"], HEIGHT - MARGIN["bottom"]
    half = lambda v: (v[1] - v[0]) / 2 if v.size > 1 else 0.5
    xr = (x[0] - half(x), x[-1] + half(x))
    yr = (y[0] - half(y), y[-1] + half(y))
    body, sx, sy = _frame(x0, y0, x1, y1, xr, yr, xlabel, ylabel, title)
    zr = _range(z)
    cw = (x1 - x0) / x.size
    ch = (y1 - y0) / y.size
    cells = []
    for i in range(y.size):
        for j in range(x.size):
            u = (z[i, j] - zr[0]) / (zr[1] - zr[0])
            cells.append(f'<rect class="cell" x="{x0 + j * cw:.2f}" y="{y1 - (i + 1) * ch:.2f}" '
                         f'width="{cw + 0.3:.2f}" height="{ch + 0.3:.2f}" fill="{_colour(u)}"/>')
    body[1:1] = cells  # under the axes
    bx = x1 + 20
    for k in range(50):
        u = k / 49
        yk = y1 - (k + 1) * (y1 - y0) / 50
        body.append(f'<rect x="{bx}" y="{yk:.2f}" width="14" height="{(y1 - y0) / 50 + 0.3:.2f}" '
                    f'fill="{_colour(u)}"/>')
    body.append(f'<text x="{bx + 18}" y="{y1}">{_fmt(zr[0])}</text>')
    body.append(f'<text x="{bx + 18}" y="{y0 + 10}">{_fmt(zr[1])}</text>')
    body.append(f'<text transform="translate({bx + 52},{(y0 + y1) / 2}) rotate(-90)" '
                f'text-anchor="middle">{escape(zlabel)}</text>')
    return _document(width, body)
