"""Minimal deterministic SVG rendering for experiment outputs.

Pure string assembly with fixed coordinate formatting: the same inputs
always produce byte-identical files.  Two plot kinds are supported, a
multi-series line plot with an optionally logarithmic x axis and a
scatter plot with a diagonal reference line on log-log axes.
"""

from __future__ import annotations

import math
from typing import Sequence

__all__ = ["line_plot", "scatter_plot"]

_WIDTH = 720
_HEIGHT = 480
_MARGIN_LEFT = 72
_MARGIN_RIGHT = 24
_MARGIN_TOP = 40
_MARGIN_BOTTOM = 56
_PALETTE = (
    "#1f77b4",
    "#d62728",
    "#2ca02c",
    "#9467bd",
    "#ff7f0e",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
)


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label_fmt(v: float) -> str:
    text = f"{v:.4g}"
    return text


class _Axis:
    """Maps data coordinates to pixel coordinates, linearly or in log10."""

    def __init__(self, lo: float, hi: float, pix_lo: float, pix_hi: float, log: bool):
        if log:
            if lo <= 0 or hi <= 0:
                raise ValueError("log axis requires positive data")
            lo, hi = math.log10(lo), math.log10(hi)
        if hi <= lo:
            pad = 0.5 if lo == hi else 0.0
            lo, hi = lo - pad, hi + pad
        span = hi - lo
        lo -= 0.04 * span
        hi += 0.04 * span
        self.lo, self.hi = lo, hi
        self.pix_lo, self.pix_hi = pix_lo, pix_hi
        self.log = log

    def to_pix(self, v: float) -> float:
        u = math.log10(v) if self.log else v
        frac = (u - self.lo) / (self.hi - self.lo)
        return self.pix_lo + frac * (self.pix_hi - self.pix_lo)

    def ticks(self) -> list[float]:
        if self.log:
            first = math.ceil(self.lo)
            last = math.floor(self.hi)
            decades = [10.0**d for d in range(first, last + 1)]
            if len(decades) >= 2:
                return decades
            anchor = 10.0 ** math.floor(self.lo)
            vals = [m * anchor for m in (1, 2, 5, 10, 20, 50, 100)]
            return [v for v in vals if self.lo <= math.log10(v) <= self.hi]
        span = self.hi - self.lo
        raw = span / 5
        mag = 10.0 ** math.floor(math.log10(raw))
        for mult in (1.0, 2.0, 5.0, 10.0):
            if raw <= mult * mag:
                step = mult * mag
                break
        first = math.ceil(self.lo / step) * step
        vals = []
        v = first
        while v <= self.hi + 1e-12 * span:
            vals.append(0.0 if abs(v) < 1e-12 * span else v)
            v += step
        return vals


def _axes_svg(x_axis: _Axis, y_axis: _Axis, x_label: str, y_label: str) -> list[str]:
    left, right = _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT
    top, bottom = _MARGIN_TOP, _HEIGHT - _MARGIN_BOTTOM
    parts = [
        f'<rect x="{left}" y="{top}" width="{right - left}" height="{bottom - top}"'
        ' fill="none" stroke="#000000" stroke-width="1"/>'
    ]
    for tick in x_axis.ticks():
        px = x_axis.to_pix(tick if not x_axis.log else tick)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{bottom}" x2="{_fmt(px)}" y2="{bottom + 5}"'
            ' stroke="#000000" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{bottom + 20}" font-size="12"'
            f' text-anchor="middle">{_label_fmt(tick)}</text>'
        )
    for tick in y_axis.ticks():
        py = y_axis.to_pix(tick)
        parts.append(
            f'<line x1="{left - 5}" y1="{_fmt(py)}" x2="{left}" y2="{_fmt(py)}"'
            ' stroke="#000000" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{left - 8}" y="{_fmt(py + 4)}" font-size="12"'
            f' text-anchor="end">{_label_fmt(tick)}</text>'
        )
    parts.append(
        f'<text x="{(left + right) // 2}" y="{_HEIGHT - 12}" font-size="13"'
        f' text-anchor="middle">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{(top + bottom) // 2}" font-size="13" text-anchor="middle"'
        f' transform="rotate(-90 18 {(top + bottom) // 2})">{y_label}</text>'
    )
    return parts


def _document(title: str, body: list[str]) -> str:
    head = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}"'
        f' viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
        f'<text x="{_WIDTH // 2}" y="24" font-size="15" text-anchor="middle">'
        f"{title}</text>",
    ]
    return "\n".join(head + body + ["</svg>"]) + "\n"


def line_plot(
    series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
    title: str,
    x_label: str,
    y_label: str,
    log_x: bool = True,
) -> str:
    """Render labeled (x, y) series as polylines with markers and a legend."""
    if not series or all(len(xs) == 0 for _, xs, _ in series):
        raise ValueError("line_plot requires at least one non-empty series")
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    x_axis = _Axis(min(xs_all), max(xs_all), _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT, log_x)
    y_axis = _Axis(min(ys_all), max(ys_all), _HEIGHT - _MARGIN_BOTTOM, _MARGIN_TOP, False)
    body = _axes_svg(x_axis, y_axis, x_label, y_label)
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(
            f"{_fmt(x_axis.to_pix(x))},{_fmt(y_axis.to_pix(y))}" for x, y in zip(xs, ys)
        )
        if len(xs) > 1:
            body.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}"'
                ' stroke-width="1.5"/>'
            )
        for x, y in zip(xs, ys):
            body.append(
                f'<circle cx="{_fmt(x_axis.to_pix(x))}" cy="{_fmt(y_axis.to_pix(y))}"'
                f' r="3" fill="{color}"/>'
            )
        ly = _MARGIN_TOP + 16 + 16 * idx
        lx = _WIDTH - _MARGIN_RIGHT - 150
        body.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}"'
            f' stroke="{color}" stroke-width="2"/>'
        )
        body.append(f'<text x="{lx + 28}" y="{ly}" font-size="12">{label}</text>')
    return _document(title, body)


def scatter_plot(
    xs: Sequence[float],
    ys: Sequence[float],
    highlight: Sequence[bool],
    title: str,
    x_label: str,
    y_label: str,
    highlight_label: str = "flagged",
) -> str:
    """Render log-log scatter points with a y = x reference diagonal.

    Highlighted points are drawn in a second color; the legend names both
    groups.
    """
    if len(xs) != len(ys) or len(xs) != len(highlight):
        raise ValueError("xs, ys, and highlight must have equal lengths")
    body: list[str]
    if not xs:
        body = [
            f'<text x="{_WIDTH // 2}" y="{_HEIGHT // 2}" font-size="14"'
            ' text-anchor="middle">no data</text>'
        ]
        return _document(title, body)
    lo = min(min(xs), min(ys))
    hi = max(max(xs), max(ys))
    x_axis = _Axis(lo, hi, _MARGIN_LEFT, _WIDTH - _MARGIN_RIGHT, True)
    y_axis = _Axis(lo, hi, _HEIGHT - _MARGIN_BOTTOM, _MARGIN_TOP, True)
    body = _axes_svg(x_axis, y_axis, x_label, y_label)
    diag_lo, diag_hi = 10.0**x_axis.lo, 10.0**x_axis.hi
    body.append(
        f'<line x1="{_fmt(x_axis.to_pix(diag_lo))}" y1="{_fmt(y_axis.to_pix(diag_lo))}"'
        f' x2="{_fmt(x_axis.to_pix(diag_hi))}" y2="{_fmt(y_axis.to_pix(diag_hi))}"'
        ' stroke="#999999" stroke-width="1" stroke-dasharray="4 3"/>'
    )
    for x, y, flag in zip(xs, ys, highlight):
        color = _PALETTE[1] if flag else _PALETTE[0]
        body.append(
            f'<circle cx="{_fmt(x_axis.to_pix(x))}" cy="{_fmt(y_axis.to_pix(y))}" r="3"'
            f' fill="{color}" fill-opacity="0.8"/>'
        )
    lx = _WIDTH - _MARGIN_RIGHT - 150
    body.append(
        f'<circle cx="{lx + 8}" cy="{_MARGIN_TOP + 12}" r="3" fill="{_PALETTE[0]}"/>'
    )
    body.append(
        f'<text x="{lx + 18}" y="{_MARGIN_TOP + 16}" font-size="12">unflagged</text>'
    )
    body.append(
        f'<circle cx="{lx + 8}" cy="{_MARGIN_TOP + 28}" r="3" fill="{_PALETTE[1]}"/>'
    )
    body.append(
        f'<text x="{lx + 18}" y="{_MARGIN_TOP + 32}" font-size="12">'
        f"{highlight_label}</text>"
    )
    return _document(title, body)
