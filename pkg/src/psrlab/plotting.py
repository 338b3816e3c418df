"""Dependency-free SVG line plots of sweep and scan CSV files.

Output bytes depend only on the input data, so plots can be compared
against golden files.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import MissingColumn, ParseError

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=30, bottom=50)


@dataclass(frozen=True)
class Series:
    x: np.ndarray
    y: np.ndarray
    xlabel: str
    ylabel: str
    title: str


def read_series(text: str) -> Series:
    """Sweep CSVs plot min_db against value; scan CSVs plot dB against phase."""
    rows = [r for r in csv.reader(io.StringIO(text))]
    lines = [(i, r) for i, r in enumerate(rows, start=1) if r and not r[0].startswith("#")]
    if not lines:
        raise ParseError("empty CSV", 1)
    header = [h.strip() for h in lines[0][1]]
    if "phi_rad" in header or "variance_snu" in header:
        xcol, ycol, kind = "phi_rad", "variance_snu", "scan"
    else:
        xcol, ycol, kind = "value", "min_db", "sweep"
    for col in (xcol, ycol):
        if col not in header:
            raise MissingColumn(col)
    ix, iy = header.index(xcol), header.index(ycol)
    ip = header.index("param") if "param" in header else None
    xs, ys, param = [], [], None
    for lineno, row in lines[1:]:
        try:
            x, y = float(row[ix]), float(row[iy])
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad row {row!r}", lineno) from exc
        if ip is not None and param is None:
            param = row[ip]
        if kind == "scan":
            if y <= 0:
                raise ParseError(f"non-positive variance {y}", lineno)
            y = 10.0 * math.log10(y)
        if math.isfinite(x) and math.isfinite(y):
            xs.append(x)
            ys.append(y)
    if not xs:
        raise ParseError("no data rows", len(rows))
    if kind == "scan":
        return Series(np.array(xs), np.array(ys), "LO phase (rad)", "noise (dB rel. SQL)", "homodyne phase scan")
    return Series(np.array(xs), np.array(ys), param or "value", "min noise (dB rel. SQL)", f"sweep of {param}")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi == lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _num(v: float) -> str:
    return f"{v:.2f}"


def render_svg(series: Series) -> str:
    x, y = series.x, series.y
    xlo, xhi = float(x.min()), float(x.max())
    ylo, yhi = min(float(y.min()), 0.0), max(float(y.max()), 0.0)
    if xhi == xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    l, r, t, b = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

    def px(v):
        return l + (v - xlo) / (xhi - xlo) * (r - l)

    def py(v):
        return b - (v - ylo) / (yhi - ylo) * (b - t)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{series.title}</text>',
        f'<line class="axis" x1="{l}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/>',
        f'<line class="axis" x1="{l}" y1="{t}" x2="{l}" y2="{b}" stroke="black"/>',
    ]
    for v in _ticks(xlo, xhi):
        out.append(f'<line x1="{_num(px(v))}" y1="{b}" x2="{_num(px(v))}" y2="{b + 5}" stroke="black"/>')
        out.append(
            f'<text x="{_num(px(v))}" y="{b + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{v:g}</text>'
        )
    for v in _ticks(ylo, yhi):
        out.append(f'<line x1="{l - 5}" y1="{_num(py(v))}" x2="{l}" y2="{_num(py(v))}" stroke="black"/>')
        out.append(
            f'<text x="{l - 8}" y="{_num(py(v) + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{v:g}</text>'
        )
    out.append(
        f'<line class="sql" x1="{l}" y1="{_num(py(0.0))}" x2="{r}" y2="{_num(py(0.0))}" stroke="gray" stroke-dasharray="4 3"/>'
    )
    pts = " ".join(f"{_num(px(a))},{_num(py(c))}" for a, c in zip(x, y))
    out.append(f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for a, c in zip(x, y):
        out.append(f'<circle cx="{_num(px(a))}" cy="{_num(py(c))}" r="2.5" fill="steelblue"/>')
    out.append(
        f'<text x="{(l + r) / 2:.2f}" y="{HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">{series.xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{(t + b) / 2:.2f}" text-anchor="middle" font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {(t + b) / 2:.2f})">{series.ylabel}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_svg(csv_path: str | Path, svg_path: str | Path) -> str:
    text = render_svg(read_series(Path(csv_path).read_text()))
    Path(svg_path).write_text(text)
    return text
