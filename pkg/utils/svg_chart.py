"""
SVG Chart - Line charts from result tables, one polyline per series
"""
import os
from typing import List, Tuple
from xml.sax.saxutils import escape

import numpy as np
import pandas as pd

WIDTH = 640
HEIGHT = 400
MARGIN = {'left': 70, 'right': 150, 'top': 40, 'bottom': 55}
TICKS = 5
PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#ff7f0e', '#9467bd', '#8c564b', '#e377c2', '#7f7f7f']


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _span(values: np.ndarray) -> Tuple[float, float]:
    lo, hi = float(np.min(values)), float(np.max(values))
    if lo == hi:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def render_line_chart(frame: pd.DataFrame, x: str, y: str, series: str, title: str = '') -> str:
    """SVG document with axes labelled by column name and a legend keyed by series"""
    plot_w = WIDTH - MARGIN['left'] - MARGIN['right']
    plot_h = HEIGHT - MARGIN['top'] - MARGIN['bottom']
    x_lo, x_hi = _span(frame[x].to_numpy(dtype=np.float64))
    y_lo, y_hi = _span(frame[y].to_numpy(dtype=np.float64))

    def sx(v: float) -> float:
        return MARGIN['left'] + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return MARGIN['top'] + plot_h - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')

    bottom, left = MARGIN['top'] + plot_h, MARGIN['left']
    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{left + plot_w}" y2="{bottom}" stroke="black"/>')
    parts.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}" stroke="black"/>')
    for tick in np.linspace(x_lo, x_hi, TICKS):
        parts.append(f'<text x="{_fmt(sx(tick))}" y="{bottom + 18}" text-anchor="middle" '
                     f'font-size="11">{tick:.3g}</text>')
    for tick in np.linspace(y_lo, y_hi, TICKS):
        parts.append(f'<text x="{left - 8}" y="{_fmt(sy(tick) + 4)}" text-anchor="end" '
                     f'font-size="11">{tick:.3g}</text>')
    parts.append(f'<text x="{left + plot_w / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
                 f'font-size="13">{escape(x)}</text>')
    parts.append(f'<text x="18" y="{MARGIN["top"] + plot_h / 2:.0f}" text-anchor="middle" font-size="13" '
                 f'transform="rotate(-90 18 {MARGIN["top"] + plot_h / 2:.0f})">{escape(y)}</text>')

    for index, (name, group) in enumerate(frame.groupby(series, sort=True)):
        color = PALETTE[index % len(PALETTE)]
        group = group.sort_values(x, kind='mergesort')
        points = ' '.join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(group[x], group[y]))
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{points}"/>')
        legend_y = MARGIN['top'] + 18 * index
        legend_x = left + plot_w + 15
        parts.append(f'<rect x="{legend_x}" y="{legend_y}" width="14" height="4" fill="{color}"/>')
        parts.append(f'<text x="{legend_x + 20}" y="{legend_y + 6}" font-size="12">{escape(str(name))}</text>')

    parts.append('</svg>')
    return '\n'.join(parts) + '\n'


def value_text(value) -> str:
    return f"{value:g}" if isinstance(value, float) else str(value)


def facet_groups(frame: pd.DataFrame, facet: str) -> List[Tuple[object, pd.DataFrame]]:
    if not facet:
        return [(None, frame)]
    return [(value, group) for value, group in frame.groupby(facet, sort=True)]


def facet_path(out_path: str, facet: str, value) -> str:
    """<stem>_<facet><value><suffix>; the bare path when there is a single facet"""
    if value is None:
        return out_path
    stem, suffix = os.path.splitext(out_path)
    return f"{stem}_{facet}{value_text(value)}{suffix}"


def write_faceted_svgs(frame: pd.DataFrame, x: str, y: str, series: str, facet: str, out_path: str) -> List[str]:
    groups = facet_groups(frame, facet)
    single = len(groups) == 1
    written = []
    for value, group in groups:
        path = out_path if single else facet_path(out_path, facet, value)
        title = '' if value is None else f"{facet} = {value_text(value)}"
        with open(path, 'w', encoding='utf-8', newline='\n') as fh:
            fh.write(render_line_chart(group, x, y, series, title))
        written.append(path)
    return written
