"""Minimal deterministic SVG emitters for the pipeline artifacts.

Hand-rolled on purpose: the outputs are golden-diffed, so they must be
byte-identical across runs and platforms.  No timestamps, no generated ids,
fixed decimal formatting everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

WIDTH, HEIGHT = 640.0, 440.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70.0, 20.0, 36.0, 50.0
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#17becf", "#7f7f7f")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


@dataclass
class Frame:
    """Maps data coordinates into the fixed plot viewport."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self) -> None:
        if self.x_max <= self.x_min:
            pad = max(abs(self.x_min), 1.0) * 0.05
            self.x_min -= pad
            self.x_max += pad
        if self.y_max <= self.y_min:
            pad = max(abs(self.y_min), 1.0) * 0.05
            self.y_min -= pad
            self.y_max += pad

    def x(self, v: float) -> float:
        span = self.x_max - self.x_min
        return MARGIN_L + (v - self.x_min) / span * (WIDTH - MARGIN_L - MARGIN_R)

    def y(self, v: float) -> float:
        span = self.y_max - self.y_min
        return HEIGHT - MARGIN_B - (v - self.y_min) / span \
            * (HEIGHT - MARGIN_T - MARGIN_B)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    import math
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * max(1.0, abs(hi)):
        out.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return out


def _axes(frame: Frame, title: str, xlabel: str, ylabel: str) -> list[str]:
    el = [
        f'<rect x="{_fmt(MARGIN_L)}" y="{_fmt(MARGIN_T)}" '
        f'width="{_fmt(WIDTH - MARGIN_L - MARGIN_R)}" '
        f'height="{_fmt(HEIGHT - MARGIN_T - MARGIN_B)}" '
        'fill="none" stroke="#404040" stroke-width="1"/>',
        f'<text x="{_fmt(WIDTH / 2)}" y="22" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<text x="{_fmt(WIDTH / 2)}" y="{_fmt(HEIGHT - 10)}" '
        f'text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="16" y="{_fmt(HEIGHT / 2)}" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 16 {_fmt(HEIGHT / 2)})">'
        f'{ylabel}</text>',
    ]
    for v in _ticks(frame.x_min, frame.x_max):
        px = frame.x(v)
        el.append(f'<line x1="{_fmt(px)}" y1="{_fmt(HEIGHT - MARGIN_B)}" '
                  f'x2="{_fmt(px)}" y2="{_fmt(HEIGHT - MARGIN_B + 5)}" '
                  'stroke="#404040" stroke-width="1"/>')
        el.append(f'<text x="{_fmt(px)}" y="{_fmt(HEIGHT - MARGIN_B + 18)}" '
                  f'text-anchor="middle" font-size="10">{v:.4g}</text>')
    for v in _ticks(frame.y_min, frame.y_max):
        py = frame.y(v)
        el.append(f'<line x1="{_fmt(MARGIN_L - 5)}" y1="{_fmt(py)}" '
                  f'x2="{_fmt(MARGIN_L)}" y2="{_fmt(py)}" '
                  'stroke="#404040" stroke-width="1"/>')
        el.append(f'<text x="{_fmt(MARGIN_L - 8)}" y="{_fmt(py + 3)}" '
                  f'text-anchor="end" font-size="10">{v:.4g}</text>')
    return el


def _document(elements: list[str]) -> str:
    head = ('<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{WIDTH:.0f}" height="{HEIGHT:.0f}" '
            f'viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">')
    body = "\n".join(elements)
    return f"{head}\n{body}\n</svg>\n"


def _legend(entries: list[tuple[str, str, str]]) -> list[str]:
    # entries: (label, color, marker) with marker in {dot, cross, line}
    el = []
    y = MARGIN_T + 14.0
    x = WIDTH - MARGIN_R - 150.0
    for label, color, marker in entries:
        if marker == "dot":
            el.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y - 3)}" r="4" '
                      f'fill="{color}"/>')
        elif marker == "cross":
            el.append(f'<path d="M {_fmt(x - 4)} {_fmt(y - 7)} L {_fmt(x + 4)} '
                      f'{_fmt(y + 1)} M {_fmt(x - 4)} {_fmt(y + 1)} '
                      f'L {_fmt(x + 4)} {_fmt(y - 7)}" stroke="{color}" '
                      'stroke-width="2" fill="none"/>')
        else:
            el.append(f'<line x1="{_fmt(x - 6)}" y1="{_fmt(y - 3)}" '
                      f'x2="{_fmt(x + 6)}" y2="{_fmt(y - 3)}" '
                      f'stroke="{color}" stroke-width="2"/>')
        el.append(f'<text x="{_fmt(x + 10)}" y="{_fmt(y)}" '
                  f'font-size="11">{label}</text>')
        y += 16.0
    return el


def scatter_svg(path: str | Path, title: str, xlabel: str, ylabel: str,
                dot_series: list[tuple[str, list[tuple[float, float]], str]],
                cross_series: list[tuple[str, list[tuple[float, float]], str]],
                ) -> None:
    """Scatter with filled dots and cross markers, one color per series."""
    xs = [p[0] for _, pts, _ in dot_series + cross_series for p in pts]
    ys = [p[1] for _, pts, _ in dot_series + cross_series for p in pts]
    if not xs:
        xs, ys = [0.0], [0.0]
    dx = (max(xs) - min(xs)) or max(abs(max(xs)), 1.0) * 0.1
    dy = (max(ys) - min(ys)) or max(abs(max(ys)), 1.0) * 0.1
    frame = Frame(min(xs) - 0.08 * dx, max(xs) + 0.08 * dx,
                  min(ys) - 0.08 * dy, max(ys) + 0.08 * dy)
    el = _axes(frame, title, xlabel, ylabel)
    legend = []
    for label, pts, color in dot_series:
        legend.append((label, color, "dot"))
        for x, y in pts:
            el.append(f'<circle cx="{_fmt(frame.x(x))}" '
                      f'cy="{_fmt(frame.y(y))}" r="4" fill="{color}" '
                      'fill-opacity="0.75"/>')
    for label, pts, color in cross_series:
        legend.append((label, color, "cross"))
        for x, y in pts:
            px, py = frame.x(x), frame.y(y)
            el.append(f'<path d="M {_fmt(px - 5)} {_fmt(py - 5)} '
                      f'L {_fmt(px + 5)} {_fmt(py + 5)} '
                      f'M {_fmt(px - 5)} {_fmt(py + 5)} '
                      f'L {_fmt(px + 5)} {_fmt(py - 5)}" '
                      f'stroke="{color}" stroke-width="2.5" fill="none"/>')
    el += _legend(legend)
    Path(path).write_text(_document(el))


def bars_svg(path: str | Path, title: str, xlabel: str, ylabel: str,
             categories: list[str], series: list[tuple[str, list[float]]],
             ) -> None:
    """Grouped bars: one category per x slot, one bar per series inside."""
    n_cat = len(categories)
    n_ser = max(len(series), 1)
    top = max((max(vals) for _, vals in series if vals), default=1.0)
    frame = Frame(0.0, float(n_cat), 0.0, top * 1.08)
    el = _axes(frame, title, xlabel, ylabel)
    slot = (WIDTH - MARGIN_L - MARGIN_R) / max(n_cat, 1)
    bar_w = slot * 0.8 / n_ser
    legend = []
    for s, (label, vals) in enumerate(series):
        color = PALETTE[s % len(PALETTE)]
        legend.append((label, color, "line"))
        for k, v in enumerate(vals):
            x0 = MARGIN_L + k * slot + slot * 0.1 + s * bar_w
            y0 = frame.y(v)
            h = (HEIGHT - MARGIN_B) - y0
            el.append(f'<rect x="{_fmt(x0)}" y="{_fmt(y0)}" '
                      f'width="{_fmt(bar_w)}" height="{_fmt(h)}" '
                      f'fill="{color}"/>')
    step = max(1, n_cat // 16)
    for k in range(0, n_cat, step):
        px = MARGIN_L + (k + 0.5) * slot
        el.append(f'<text x="{_fmt(px)}" y="{_fmt(HEIGHT - MARGIN_B + 18)}" '
                  f'text-anchor="middle" font-size="9">{categories[k]}</text>')
    el += _legend(legend)
    Path(path).write_text(_document(el))


def lines_svg(path: str | Path, title: str, xlabel: str, ylabel: str,
              series: list[tuple[str, list[float], list[float], str, bool]],
              ) -> None:
    """Overlaid polylines; the last tuple flag selects a dashed stroke."""
    xs = [x for _, sx, _, _, _ in series for x in sx]
    ys = [y for _, _, sy, _, _ in series for y in sy]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    dy = (max(ys) - min(ys)) or max(abs(max(ys)), 1e-9) * 0.1
    frame = Frame(min(xs), max(xs), min(ys) - 0.05 * dy, max(ys) + 0.05 * dy)
    el = _axes(frame, title, xlabel, ylabel)
    legend = []
    for label, sx, sy, color, dashed in series:
        legend.append((label, color, "line"))
        pts = " ".join(f"{_fmt(frame.x(x))},{_fmt(frame.y(y))}"
                       for x, y in zip(sx, sy))
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        el.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                  f'stroke-width="1.6"{dash}/>')
    el += _legend(legend)
    Path(path).write_text(_document(el))
