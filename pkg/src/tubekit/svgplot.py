"""Minimal deterministic SVG line charts.

Hand-rolled on purpose: plotting libraries embed timestamps and
non-reproducible element ids, and the CLI promises byte-identical outputs
for identical inputs. Only needs polylines, axes and a legend.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_W, _H = 640, 440
_MARGIN = 60


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _scale(values, lo, hi, out_lo, out_hi):
    if hi == lo:
        return [(out_lo + out_hi) / 2 for _ in values]
    return [out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo) for v in values]


def line_chart(series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
               title: str, x_label: str, y_label: str) -> str:
    """Render named (x, y) series as an SVG document string."""
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(min(ys), 0.0), max(max(ys), 1e-9)
    plot_w, plot_h = _W - 2 * _MARGIN, _H - 2 * _MARGIN

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{title}</text>',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{plot_w}" height="{plot_h}" '
        f'fill="none" stroke="#444"/>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">{x_label}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {_H / 2})">{y_label}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        px = _MARGIN + frac * plot_w
        py = _H - _MARGIN - frac * plot_h
        parts.append(f'<text x="{_fmt(px)}" y="{_H - _MARGIN + 16}" '
                     f'text-anchor="middle" font-size="10" font-family="sans-serif">'
                     f'{_fmt(x_lo + frac * (x_hi - x_lo))}</text>')
        parts.append(f'<text x="{_MARGIN - 6}" y="{_fmt(py + 3)}" '
                     f'text-anchor="end" font-size="10" font-family="sans-serif">'
                     f'{_fmt(y_lo + frac * (y_hi - y_lo))}</text>')
    for idx, (name, sx, sy) in enumerate(series):
        color = _COLORS[idx % len(_COLORS)]
        px = _scale(sx, x_lo, x_hi, _MARGIN, _W - _MARGIN)
        py = _scale(sy, y_lo, y_hi, _H - _MARGIN, _MARGIN)
        points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in zip(px, py))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                     f'points="{points}"/>')
        ly = _MARGIN + 16 + 16 * idx
        parts.append(f'<line x1="{_W - _MARGIN - 110}" y1="{ly - 4}" '
                     f'x2="{_W - _MARGIN - 86}" y2="{ly - 4}" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MARGIN - 80}" y="{ly}" font-size="11" '
                     f'font-family="sans-serif">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def save_chart(path: str | Path,
               series: Sequence[tuple[str, Sequence[float], Sequence[float]]],
               title: str, x_label: str, y_label: str) -> None:
    Path(path).write_text(line_chart(series, title, x_label, y_label))
