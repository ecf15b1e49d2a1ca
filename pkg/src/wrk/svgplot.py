"""Minimal deterministic SVG plotting.

Hand-emitted markup instead of a plotting library so that figures are a pure
function of their inputs: fixed layout, fixed palette, fixed number
formatting, no timestamps or generated ids.  Byte-identical input produces
byte-identical SVG, which keeps figures inside the reproducibility contract
of the run manifests.
"""
from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64.0, 18.0, 34.0, 46.0


def _fmt(v: float) -> str:
    out = f"{v:.2f}"
    return "0.00" if out == "-0.00" else out


def _tick_label(v: float) -> str:
    out = f"{v:.6g}"
    return "0" if out == "-0" else out


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    span = hi - lo
    raw = span / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if span / step <= target + 0.5:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _data_range(values: Sequence[np.ndarray]) -> tuple[float, float]:
    lo = min(float(np.min(v)) for v in values)
    hi = max(float(np.max(v)) for v in values)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ConfigError("plot data must be finite")
    if hi - lo < 1e-12:
        pad = 0.5 if hi == 0 else max(1e-12, abs(hi) * 0.1)
        lo, hi = lo - pad, hi + pad
    else:
        pad = 0.04 * (hi - lo)
        lo, hi = lo - pad, hi + pad
    return lo, hi


class _Canvas:
    def __init__(self, width: int, height: int, xlim, ylim) -> None:
        self.width = float(width)
        self.height = float(height)
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.px0 = _MARGIN_L
        self.px1 = self.width - _MARGIN_R
        self.py0 = self.height - _MARGIN_B
        self.py1 = _MARGIN_T

    def x(self, v: float) -> float:
        return self.px0 + (v - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v: float) -> float:
        return self.py0 + (v - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)

    def polyline(self, xs, ys, color: str, width: float = 1.5) -> str:
        pts = " ".join(f"{_fmt(self.x(float(a)))},{_fmt(self.y(float(b)))}"
                       for a, b in zip(xs, ys))
        return (f'<polyline fill="none" stroke="{color}" '
                f'stroke-width="{width:g}" points="{pts}"/>')

    def frame_and_axes(self, title: str, xlabel: str, ylabel: str) -> list[str]:
        parts = [
            f'<rect x="{_fmt(self.px0)}" y="{_fmt(self.py1)}" '
            f'width="{_fmt(self.px1 - self.px0)}" height="{_fmt(self.py0 - self.py1)}" '
            f'fill="white" stroke="#333333" stroke-width="1"/>'
        ]
        for v in _nice_ticks(self.x0, self.x1):
            px = self.x(v)
            parts.append(f'<line x1="{_fmt(px)}" y1="{_fmt(self.py0)}" '
                         f'x2="{_fmt(px)}" y2="{_fmt(self.py0 + 5)}" stroke="#333333"/>')
            parts.append(f'<text x="{_fmt(px)}" y="{_fmt(self.py0 + 18)}" '
                         f'font-size="11" text-anchor="middle">{_tick_label(v)}</text>')
        for v in _nice_ticks(self.y0, self.y1):
            py = self.y(v)
            parts.append(f'<line x1="{_fmt(self.px0 - 5)}" y1="{_fmt(py)}" '
                         f'x2="{_fmt(self.px0)}" y2="{_fmt(py)}" stroke="#333333"/>')
            parts.append(f'<text x="{_fmt(self.px0 - 8)}" y="{_fmt(py + 3.5)}" '
                         f'font-size="11" text-anchor="end">{_tick_label(v)}</text>')
        if title:
            parts.append(f'<text x="{_fmt((self.px0 + self.px1) / 2)}" y="20" '
                         f'font-size="14" text-anchor="middle">{escape(title)}</text>')
        if xlabel:
            parts.append(f'<text x="{_fmt((self.px0 + self.px1) / 2)}" '
                         f'y="{_fmt(self.height - 10)}" font-size="12" '
                         f'text-anchor="middle">{escape(xlabel)}</text>')
        if ylabel:
            cy = (self.py0 + self.py1) / 2
            parts.append(f'<text x="16" y="{_fmt(cy)}" font-size="12" '
                         f'text-anchor="middle" '
                         f'transform="rotate(-90 16 {_fmt(cy)})">{escape(ylabel)}</text>')
        return parts

    def document(self, body: list[str]) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width:g}" height="{self.height:g}" '
                f'viewBox="0 0 {self.width:g} {self.height:g}" '
                f'font-family="Helvetica, Arial, sans-serif">')
        return "\n".join([head, *body, "</svg>"]) + "\n"


def line_plot(series, *, title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 420, legend: bool = True) -> str:
    """Overlay line plot.  ``series`` is a sequence of (label, xs, ys)."""
    series = [(str(lbl), np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
              for lbl, xs, ys in series]
    if not series or any(xs.size == 0 or xs.shape != ys.shape for _, xs, ys in series):
        raise ConfigError("line_plot needs non-empty series of equal-length x/y")
    cv = _Canvas(width, height,
                 _data_range([xs for _, xs, _ in series]),
                 _data_range([ys for _, _, ys in series]))
    body = cv.frame_and_axes(title, xlabel, ylabel)
    for i, (_, xs, ys) in enumerate(series):
        body.append(cv.polyline(xs, ys, PALETTE[i % len(PALETTE)]))
    if legend and any(lbl for lbl, _, _ in series):
        for i, (lbl, _, _) in enumerate(series):
            ly = _MARGIN_T + 14 + 16 * i
            lx = cv.px1 - 150
            body.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" x2="{_fmt(lx + 22)}" '
                        f'y2="{_fmt(ly - 4)}" stroke="{PALETTE[i % len(PALETTE)]}" '
                        f'stroke-width="2"/>')
            body.append(f'<text x="{_fmt(lx + 28)}" y="{_fmt(ly)}" '
                        f'font-size="11">{escape(lbl)}</text>')
    return cv.document(body)


def phase_plot(trajectories, points=(), *, title: str = "", xlabel: str = "",
               ylabel: str = "", width: int = 520, height: int = 520) -> str:
    """Overlay of 2-d trajectories plus marked points (e.g. equilibria)."""
    trajs = [(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float))
             for xs, ys in trajectories]
    if not trajs or any(xs.size == 0 or xs.shape != ys.shape for xs, ys in trajs):
        raise ConfigError("phase_plot needs non-empty trajectories")
    pts = [(float(x), float(y), str(lbl)) for x, y, lbl in points]
    xdata = [xs for xs, _ in trajs] + [np.array([p[0] for p in pts])] * bool(pts)
    ydata = [ys for _, ys in trajs] + [np.array([p[1] for p in pts])] * bool(pts)
    cv = _Canvas(width, height, _data_range(xdata), _data_range(ydata))
    body = cv.frame_and_axes(title, xlabel, ylabel)
    for i, (xs, ys) in enumerate(trajs):
        body.append(cv.polyline(xs, ys, PALETTE[i % len(PALETTE)], width=1.0))
    for x, y, lbl in pts:
        body.append(f'<circle cx="{_fmt(cv.x(x))}" cy="{_fmt(cv.y(y))}" r="4" '
                    f'fill="#000000"/>')
        if lbl:
            body.append(f'<text x="{_fmt(cv.x(x) + 7)}" y="{_fmt(cv.y(y) - 6)}" '
                        f'font-size="11">{escape(lbl)}</text>')
    return cv.document(body)
