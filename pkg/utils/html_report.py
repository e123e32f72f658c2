"""
HTML Report - Interactive plotly version of the result charts
"""
import pandas as pd
import plotly.graph_objects as go
from plotly.subplots import make_subplots

from utils.svg_chart import PALETTE, facet_groups, value_text


def build_figure(frame: pd.DataFrame, x: str, y: str, series: str, facet: str = '') -> go.Figure:
    """One subplot per facet value, one line per series with a shared legend"""
    groups = facet_groups(frame, facet)
    titles = [f"{facet} = {value_text(value)}" if value is not None else '' for value, _ in groups]
    fig = make_subplots(rows=len(groups), cols=1, subplot_titles=titles,
                        vertical_spacing=min(0.08, 0.9 / max(len(groups) - 1, 1)))

    names = sorted(frame[series].unique(), key=str)
    colors = {name: PALETTE[i % len(PALETTE)] for i, name in enumerate(names)}
    for row, (_, group) in enumerate(groups, start=1):
        for name, lines in group.groupby(series, sort=True):
            lines = lines.sort_values(x, kind='mergesort')
            fig.add_trace(
                go.Scatter(x=lines[x], y=lines[y], mode='lines+markers', name=str(name),
                           legendgroup=str(name), showlegend=row == 1,
                           line=dict(color=colors[name])),
                row=row, col=1,
            )
        fig.update_xaxes(title_text=x, row=row, col=1)
        fig.update_yaxes(title_text=y, row=row, col=1)

    fig.update_layout(height=360 * len(groups), template='plotly_white', legend_title_text=series)
    return fig


def write_html_report(frame: pd.DataFrame, x: str, y: str, series: str, facet: str, out_path: str) -> str:
    build_figure(frame, x, y, series, facet).write_html(out_path, include_plotlyjs=True, full_html=True)
    return out_path
