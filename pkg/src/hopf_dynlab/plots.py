"""Minimal self-contained SVG line/scatter/histogram plots (800x500, deterministic output)."""

from __future__ import annotations

import math
from html import escape

from .geometry import DomainError

WIDTH, HEIGHT = 800, 500
LEFT, RIGHT, TOP, BOTTOM = 80, 30, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _f(x: float) -> str:
    return f"{x:.2f}"


class _Canvas:
    def __init__(self, xs, ys, title, xlabel, ylabel):
        xs = [x for x in xs if math.isfinite(x)]
        ys = [y for y in ys if math.isfinite(y)]
        if not xs or not ys:
            raise DomainError("nothing to plot")
        self.x0, self.x1 = _padded(min(xs), max(xs))
        self.y0, self.y1 = _padded(min(ys), max(ys))
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="13">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    def px(self, x):
        return LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)

    def py(self, y):
        return HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)

    def _axes(self, xlabel, ylabel):
        p = self.parts
        xb, yb = HEIGHT - BOTTOM, LEFT
        p.append(f'<line x1="{yb}" y1="{xb}" x2="{WIDTH - RIGHT}" y2="{xb}" stroke="black"/>')
        p.append(f'<line x1="{yb}" y1="{TOP}" x2="{yb}" y2="{xb}" stroke="black"/>')
        for i in range(6):
            xv = self.x0 + (self.x1 - self.x0) * i / 5
            yv = self.y0 + (self.y1 - self.y0) * i / 5
            p.append(f'<text x="{_f(self.px(xv))}" y="{xb + 18}" text-anchor="middle">{xv:.3g}</text>')
            p.append(f'<text x="{yb - 6}" y="{_f(self.py(yv) + 4)}" text-anchor="end">{yv:.3g}</text>')
        p.append(f'<text x="{(LEFT + WIDTH - RIGHT) / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
        p.append(f'<text x="20" y="{(TOP + HEIGHT - BOTTOM) / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 20 {(TOP + HEIGHT - BOTTOM) / 2})">{escape(ylabel)}</text>')

    def markers(self, pts, color):
        for x, y in pts:
            if math.isfinite(x) and math.isfinite(y):
                self.parts.append(f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" r="3.5" fill="{color}"/>')

    def line(self, pts, color, dash=False):
        pts = [(x, y) for x, y in pts if math.isfinite(x) and math.isfinite(y)]
        if len(pts) < 2:
            return
        coords = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in pts)
        extra = ' stroke-dasharray="6,4"' if dash else ""
        self.parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{extra}/>')

    def rect(self, x0, x1, y, color):
        X0, X1, Y, B = self.px(x0), self.px(x1), self.py(y), self.py(self.y0)
        self.parts.append(f'<rect x="{_f(X0)}" y="{_f(Y)}" width="{_f(X1 - X0)}" height="{_f(B - Y)}" '
                          f'fill="{color}" fill-opacity="0.5" stroke="{color}"/>')

    def label(self, row, text, color):
        self.parts.append(f'<text x="{LEFT + 12}" y="{TOP + 18 * (row + 1)}" fill="{color}">{escape(text)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _padded(lo, hi):
    if hi == lo:
        return lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _growth(data):
    series = data.get("series") or {}
    fits = data.get("fits") or {}
    pts = [(n, y) for s in series.values() for n, y in s]
    if not pts:
        raise DomainError("empty growth data")
    c = _Canvas([p[0] for p in pts], [p[1] for p in pts], "Mass growth", "n", "log m_n")
    for row, (q, s) in enumerate(sorted(series.items())):
        color = COLORS[row % len(COLORS)]
        c.markers(s, color)
        if q in fits and len(s) > 1:
            slope, intercept = fits[q]
            ns = [n for n, _ in s]
            c.line([(n, intercept + slope * n) for n in (min(ns), max(ns))], color)
            c.label(row, f"q={q}: log d̂_q = {slope:.4f}", color)
        else:
            c.label(row, f"q={q}", color)
    return c.render()


def _correlation(data):
    pts = list(data.get("points") or [])
    if not pts:
        raise DomainError("empty correlation data")
    bound = data.get("bound_slope")
    ys = [p[1] for p in pts]
    c = _Canvas([p[0] for p in pts], ys, "Decay of correlations", "n", "log |I_n|")
    c.markers(pts, COLORS[0])
    fit = data.get("fit")
    if fit is not None and len(pts) > 1:
        slope, intercept = fit
        ns = [p[0] for p in pts]
        c.line([(n, intercept + slope * n) for n in (min(ns), max(ns))], COLORS[0])
        c.label(0, f"fitted slope {slope:.4f}", COLORS[0])
    if bound is not None and len(pts) > 1:
        n0, y0 = pts[0]
        n1 = max(p[0] for p in pts)
        c.line([(n0, y0), (n1, y0 + bound * (n1 - n0))], COLORS[1], dash=True)
        c.label(1, f"bound slope (alpha/2) log((d_(k-1)+eps)/d_k) = {bound:.4f}", COLORS[1])
    return c.render()


def _histogram(data):
    values = [v for v in (data.get("values") or []) if math.isfinite(v)]
    if not values:
        raise DomainError("empty histogram data")
    sigma = data.get("sigma")
    bins = int(data.get("bins", 30))
    lo, hi = min(values), max(values)
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    width = (hi - lo) / bins
    counts = [0] * bins
    for v in values:
        counts[min(int((v - lo) / width), bins - 1)] += 1
    dens = [cnt / (len(values) * width) for cnt in counts]
    ymax = max(dens)
    curve = []
    if sigma:
        curve = [(lo + (hi - lo) * i / 200, math.exp(-0.5 * ((lo + (hi - lo) * i / 200) / sigma) ** 2)
                  / (math.sqrt(2 * math.pi) * sigma)) for i in range(201)]
        ymax = max(ymax, max(y for _, y in curve))
    c = _Canvas([lo, hi], [0.0, ymax], "Normalized Birkhoff sums", "S_n / sqrt(n)", "density")
    for i, d in enumerate(dens):
        c.rect(lo + i * width, lo + (i + 1) * width, d, COLORS[0])
    if curve:
        c.line(curve, COLORS[1])
        c.label(0, f"Gaussian, sigma = {sigma:.4f}", COLORS[1])
    return c.render()


_KINDS = {"growth": _growth, "correlation": _correlation, "histogram": _histogram}


def emit_plot(data: dict, kind: str) -> str:
    if kind not in _KINDS:
        raise DomainError(f"unknown plot kind {kind!r}")
    return _KINDS[kind](data)
