"""Dependency-free SVG line and box plots.

Output is a pure function of the inputs (no timestamps or random ids), so
plots are byte-stable across runs.
"""
from __future__ import annotations

import math
from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 640, 400
ML, MR, MT, MB = 70, 20, 40, 55


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _tick_label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-2:
        return f"{v:.0e}"
    return f"{v:g}"


class Figure:
    def __init__(self, title: str = "", xlabel: str = "", ylabel: str = "", logx: bool = False,
                 logy: bool = False):
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.logx, self.logy = logx, logy
        self.items: list = []

    def line(self, x, y, label: str = "", band=None, color: str | None = None):
        """Add a polyline; ``band`` = (lower, upper) draws a shaded envelope."""
        color = color or PALETTE[len(self.items) % len(PALETTE)]
        self.items.append(("line", np.asarray(x, float), np.asarray(y, float), label, band, color))
        return self

    def box(self, groups: dict):
        """Box plots (median, quartiles, 1.5 IQR whiskers) for named samples."""
        self.items.append(("box", groups))
        return self

    def _tx(self, v):
        return np.log10(v) if self.logx else v

    def _ty(self, v):
        return np.log10(v) if self.logy else v

    def render(self) -> str:
        boxes = [it for it in self.items if it[0] == "box"]
        lines = [it for it in self.items if it[0] == "line"]
        if boxes:
            groups = boxes[0][1]
            xs = np.arange(len(groups), dtype=float)
            ys = np.concatenate([np.asarray(v, float) for v in groups.values()])
            xlo, xhi = -0.6, len(groups) - 0.4
        else:
            xs = np.concatenate([self._tx(it[1]) for it in lines])
            ys = np.concatenate([self._ty(it[2]) for it in lines]
                                + [self._ty(np.asarray(b, float)) for it in lines if it[4] is not None for b in it[4]])
            xlo, xhi = float(np.nanmin(xs)), float(np.nanmax(xs))
        ys = ys[np.isfinite(ys)]
        ylo, yhi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
        if yhi == ylo:
            ylo, yhi = ylo - 1, yhi + 1
        pad = 0.05 * (yhi - ylo)
        ylo, yhi = ylo - pad, yhi + pad
        if xhi == xlo:
            xlo, xhi = xlo - 1, xhi + 1
        pw, ph = W - ML - MR, H - MT - MB
        X = lambda v: ML + (v - xlo) / (xhi - xlo) * pw  # noqa: E731
        Y = lambda v: MT + ph - (v - ylo) / (yhi - ylo) * ph  # noqa: E731
        out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
               'font-family="sans-serif" font-size="11">',
               f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
               f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(self.title)}</text>',
               f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
        for v in _ticks(ylo, yhi):
            lab = _tick_label(10 ** v if self.logy else v)
            out.append(f'<line x1="{ML - 4}" y1="{_fmt(Y(v))}" x2="{ML}" y2="{_fmt(Y(v))}" stroke="#333"/>'
                       f'<text x="{ML - 6}" y="{_fmt(Y(v) + 4)}" text-anchor="end">{lab}</text>')
        if boxes:
            for i, name in enumerate(groups):
                out.append(f'<text x="{_fmt(X(i))}" y="{H - MB + 16}" text-anchor="middle">{escape(str(name))}</text>')
        else:
            for v in _ticks(xlo, xhi):
                lab = _tick_label(10 ** v if self.logx else v)
                out.append(f'<line x1="{_fmt(X(v))}" y1="{MT + ph}" x2="{_fmt(X(v))}" y2="{MT + ph + 4}" '
                           f'stroke="#333"/><text x="{_fmt(X(v))}" y="{MT + ph + 16}" text-anchor="middle">{lab}</text>')
        out.append(f'<text x="{ML + pw / 2}" y="{H - 12}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="16" y="{MT + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {MT + ph / 2})">{escape(self.ylabel)}</text>')
        for k, (_, x, y, label, band, color) in enumerate(lines):
            tx, ty = self._tx(x), self._ty(y)
            if band is not None:
                lo, hi = (self._ty(np.asarray(b, float)) for b in band)
                pts = [f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in zip(tx, hi)]
                pts += [f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in zip(tx[::-1], lo[::-1])]
                out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
            pts = " ".join(f"{_fmt(X(a))},{_fmt(Y(b))}" for a, b in zip(tx, ty) if np.isfinite(b))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if label:
                ly = MT + 14 + 14 * k
                out.append(f'<line x1="{W - MR - 130}" y1="{ly - 4}" x2="{W - MR - 110}" y2="{ly - 4}" '
                           f'stroke="{color}" stroke-width="2"/><text x="{W - MR - 105}" y="{ly}">{escape(label)}</text>')
        if boxes:
            for i, v in enumerate(groups.values()):
                v = np.sort(np.asarray(v, float))
                q1, med, q3 = np.percentile(v, [25, 50, 75])
                lo = v[v >= q1 - 1.5 * (q3 - q1)].min()
                hi = v[v <= q3 + 1.5 * (q3 - q1)].max()
                c, hw = X(i), 0.25 * pw / len(groups)
                color = PALETTE[i % len(PALETTE)]
                out.append(f'<line x1="{_fmt(c)}" y1="{_fmt(Y(lo))}" x2="{_fmt(c)}" y2="{_fmt(Y(hi))}" stroke="#333"/>')
                out.append(f'<rect x="{_fmt(c - hw)}" y="{_fmt(Y(q3))}" width="{_fmt(2 * hw)}" '
                           f'height="{_fmt(Y(q1) - Y(q3))}" fill="{color}" fill-opacity="0.3" stroke="#333"/>')
                out.append(f'<line x1="{_fmt(c - hw)}" y1="{_fmt(Y(med))}" x2="{_fmt(c + hw)}" y2="{_fmt(Y(med))}" '
                           'stroke="#000" stroke-width="2"/>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.render())
