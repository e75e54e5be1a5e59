"""Minimal SVG plotting: polylines, heat maps, scatters.

Everything renders to a plain SVG string with inline styling, one root
element, no scripts and no external references, so outputs stay valid
XML and safe to embed.  Figures are sized in CSS pixels.
"""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .errors import ConfigError

__all__ = ["line_plot", "heatmap", "scatter_plot", "write_svg"]

# piecewise-linear approximation of a perceptually uniform dark-to-light
# ramp; anchors at t = 0, 1/4, 1/2, 3/4, 1
_RAMP = np.array([
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
], dtype=float)

_FONT = "font-family=\"monospace\" font-size=\"11\""


def _color(t: float) -> str:
    if not np.isfinite(t):
        return "#888888"
    t = min(max(float(t), 0.0), 1.0)
    x = t * (len(_RAMP) - 1)
    i = min(int(x), len(_RAMP) - 2)
    rgb = _RAMP[i] + (x - i) * (_RAMP[i + 1] - _RAMP[i])
    return "#%02x%02x%02x" % tuple(int(round(c)) for c in rgb)


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Canvas:
    """Accumulates SVG elements inside a fixed-size root."""

    def __init__(self, width: int, height: int):
        self.width = int(width)
        self.height = int(height)
        self.parts: list[str] = []

    def add(self, element: str) -> None:
        self.parts.append(element)

    def text(self, x, y, s, anchor="start", rotate=None) -> None:
        extra = ""
        if rotate is not None:
            extra = f' transform="rotate({rotate} {_fmt(x)} {_fmt(y)})"'
        self.add(f'<text x="{_fmt(x)}" y="{_fmt(y)}" {_FONT} '
                 f'text-anchor="{anchor}"{extra}>{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="#000", width=1.0) -> None:
        self.add(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                 f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{width}"/>')

    def rect(self, x, y, w, h, fill, stroke="none") -> None:
        self.add(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
                 f'height="{_fmt(h)}" fill="{fill}" stroke="{stroke}"/>')

    def to_string(self) -> str:
        body = "\n".join(self.parts)
        return (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect x="0" y="0" width="{self.width}" '
                f'height="{self.height}" fill="#ffffff"/>\n'
                f"{body}\n</svg>\n")


class _Frame:
    """Axes frame mapping data coordinates to pixels."""

    def __init__(self, canvas, x_range, y_range, margins=(60, 20, 30, 45)):
        ml, mr, mt, mb = margins
        self.canvas = canvas
        self.x0, self.x1 = float(x_range[0]), float(x_range[1])
        self.y0, self.y1 = float(y_range[0]), float(y_range[1])
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0
        self.px0, self.px1 = ml, canvas.width - mr
        self.py0, self.py1 = canvas.height - mb, mt  # y axis points up

    def x(self, v):
        return self.px0 + (v - self.x0) / (self.x1 - self.x0) * (self.px1 - self.px0)

    def y(self, v):
        return self.py0 + (v - self.y0) / (self.y1 - self.y0) * (self.py1 - self.py0)

    def draw_axes(self, title="", xlabel="", ylabel="", n_ticks=5) -> None:
        c = self.canvas
        c.rect(self.px0, self.py1, self.px1 - self.px0, self.py0 - self.py1,
               "none", stroke="#000")
        for v in np.linspace(self.x0, self.x1, n_ticks):
            px = self.x(v)
            c.line(px, self.py0, px, self.py0 + 4)
            c.text(px, self.py0 + 16, _fmt(v), anchor="middle")
        for v in np.linspace(self.y0, self.y1, n_ticks):
            py = self.y(v)
            c.line(self.px0 - 4, py, self.px0, py)
            c.text(self.px0 - 6, py + 4, _fmt(v), anchor="end")
        if title:
            c.text((self.px0 + self.px1) / 2, self.py1 - 10, title, anchor="middle")
        if xlabel:
            c.text((self.px0 + self.px1) / 2, c.height - 8, xlabel, anchor="middle")
        if ylabel:
            c.text(14, (self.py0 + self.py1) / 2, ylabel, anchor="middle", rotate=-90)


_SERIES_COLORS = ("#1f61a8", "#c4442a", "#2c8c4a", "#7a4ba0", "#b0821e")


def line_plot(x, series, labels=None, title="", xlabel="", ylabel="",
              width=640, height=420) -> str:
    """Polyline plot of one or more series against a shared x array.

    series is a single y array or a list of them; non-finite values
    break the polyline.
    """
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(s, dtype=float) for s in
          (series if isinstance(series, (list, tuple)) else [series])]
    if x.size < 2:
        raise ConfigError("line_plot needs at least 2 points")
    for s in ys:
        if s.shape != x.shape:
            raise ConfigError("series length must match x")
    finite = np.concatenate([s[np.isfinite(s)] for s in ys])
    if finite.size == 0:
        raise ConfigError("no finite values to plot")
    ylo, yhi = float(finite.min()), float(finite.max())
    pad = 0.05 * (yhi - ylo or 1.0)
    canvas = _Canvas(width, height)
    frame = _Frame(canvas, (x.min(), x.max()), (ylo - pad, yhi + pad))
    frame.draw_axes(title, xlabel, ylabel)
    for i, s in enumerate(ys):
        color = _SERIES_COLORS[i % len(_SERIES_COLORS)]
        pts = []
        for xv, yv in zip(x, s):
            if np.isfinite(yv):
                pts.append(f"{_fmt(frame.x(xv))},{_fmt(frame.y(yv))}")
            elif pts:
                canvas.add(_polyline(pts, color))
                pts = []
        if pts:
            canvas.add(_polyline(pts, color))
        if labels:
            canvas.text(frame.px1 - 8, frame.py1 + 16 + 14 * i,
                        labels[i], anchor="end")
            canvas.line(frame.px1 - 70, frame.py1 + 12 + 14 * i,
                        frame.px1 - 56, frame.py1 + 12 + 14 * i, color, 2)
    return canvas.to_string()


def _polyline(pts: list[str], color: str) -> str:
    return (f'<polyline points="{" ".join(pts)}" fill="none" '
            f'stroke="{color}" stroke-width="1.5"/>')


def heatmap(values, x_extent, y_extent, title="", xlabel="", ylabel="",
            width=640, height=480) -> str:
    """Colored-cell heat map of a (ny, nx) array with a value bar.

    Row 0 is drawn at the bottom (y_extent[0]); NaN cells render gray.
    """
    Z = np.asarray(values, dtype=float)
    if Z.ndim != 2 or Z.size == 0:
        raise ConfigError("heatmap needs a non-empty 2D array")
    ny, nx = Z.shape
    finite = Z[np.isfinite(Z)]
    vlo, vhi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    if vhi <= vlo:
        vhi = vlo + 1.0
    canvas = _Canvas(width, height)
    frame = _Frame(canvas, x_extent, y_extent, margins=(60, 90, 30, 45))
    dx = (frame.x1 - frame.x0) / nx
    dy = (frame.y1 - frame.y0) / ny
    for j in range(ny):
        for i in range(nx):
            px = frame.x(frame.x0 + i * dx)
            py = frame.y(frame.y0 + (j + 1) * dy)
            w = frame.x(frame.x0 + (i + 1) * dx) - px
            h = frame.y(frame.y0 + j * dy) - py
            canvas.rect(px, py, w + 0.5, h + 0.5,
                        _color((Z[j, i] - vlo) / (vhi - vlo)))
    frame.draw_axes(title, xlabel, ylabel)
    # value bar on the right edge
    bar_x, bar_w = canvas.width - 70, 16
    bar_top, bar_bot = frame.py1, frame.py0
    n_band = 64
    for b in range(n_band):
        t0 = b / n_band
        py = bar_bot + t0 * (bar_top - bar_bot)
        hpx = (bar_bot - bar_top) / n_band
        canvas.rect(bar_x, py - hpx, bar_w, hpx + 0.5, _color(t0 + 0.5 / n_band))
    canvas.rect(bar_x, bar_top, bar_w, bar_bot - bar_top, "none", stroke="#000")
    for t in np.linspace(0.0, 1.0, 5):
        py = bar_bot + t * (bar_top - bar_bot)
        canvas.text(bar_x + bar_w + 4, py + 4, _fmt(vlo + t * (vhi - vlo)))
    return canvas.to_string()


def scatter_plot(points, title="", xlabel="", ylabel="", width=640,
                 height=480, max_points=20_000, color="#1f61a8") -> str:
    """Dot plot of an (n, 2) point cloud, thinned to max_points evenly."""
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 2 or P.shape[0] == 0:
        raise ConfigError("scatter_plot needs a non-empty (n, 2) array")
    P = P[np.isfinite(P).all(axis=1)]
    if P.shape[0] == 0:
        raise ConfigError("no finite points to plot")
    if P.shape[0] > max_points:
        P = P[np.linspace(0, P.shape[0] - 1, max_points).astype(int)]
    xlo, xhi = float(P[:, 0].min()), float(P[:, 0].max())
    ylo, yhi = float(P[:, 1].min()), float(P[:, 1].max())
    padx = 0.05 * (xhi - xlo or 1.0)
    pady = 0.05 * (yhi - ylo or 1.0)
    canvas = _Canvas(width, height)
    frame = _Frame(canvas, (xlo - padx, xhi + padx), (ylo - pady, yhi + pady))
    frame.draw_axes(title, xlabel, ylabel)
    dots = "".join(
        f'<circle cx="{_fmt(frame.x(px))}" cy="{_fmt(frame.y(py))}" r="1.2"/>'
        for px, py in P)
    canvas.add(f'<g fill="{color}" fill-opacity="0.6">{dots}</g>')
    return canvas.to_string()


def write_svg(path, svg_text: str) -> None:
    with open(path, "w") as fh:
        fh.write(svg_text)
