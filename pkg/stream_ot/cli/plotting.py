"""
Plot Emission
=============

Writes a self-contained SVG of a trace metric against N on log-log axes,
with the theoretical rate lines anchored at the last point of the first
trace. Output bytes depend only on the inputs.
"""

import logging
import math
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union
from xml.sax.saxutils import quoteattr, escape

import numpy as np

from stream_ot.analysis.rates import theoretical_rates
from stream_ot.core.online_sinkhorn import Trace
from stream_ot.cli.experiment import read_trace_csv
from stream_ot.errors import ConfigurationError, InsufficientDataError, TraceIOError

WIDTH = 760
HEIGHT = 480
PLOT_BOX = (70.0, 30.0, 500.0, 390.0)  # left, top, width, height
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
GUIDE_STYLE = {"new": "6,4", "old": "2,3"}


@dataclass(frozen=True)
class LogAxes:
    """
    Mapping between log10 data coordinates and SVG pixels.

    Attributes:
        x_range: (low, high) of log10 N
        y_range: (low, high) of log10 of the metric
        box: (left, top, width, height) of the plot area
    """

    x_range: Tuple[float, float]
    y_range: Tuple[float, float]
    box: Tuple[float, float, float, float] = PLOT_BOX

    def to_pixels(self, log_x: float, log_y: float) -> Tuple[float, float]:
        left, top, width, height = self.box
        px = left + (log_x - self.x_range[0]) / (self.x_range[1] - self.x_range[0]) * width
        py = top + (self.y_range[1] - log_y) / (self.y_range[1] - self.y_range[0]) * height
        return px, py

    def to_data(self, px: float, py: float) -> Tuple[float, float]:
        left, top, width, height = self.box
        log_x = self.x_range[0] + (px - left) / width * (self.x_range[1] - self.x_range[0])
        log_y = self.y_range[1] - (py - top) / height * (self.y_range[1] - self.y_range[0])
        return log_x, log_y


def _series(trace: Trace, column: str) -> Tuple[np.ndarray, np.ndarray]:
    N = trace.column("N")
    values = trace.column(column)
    keep = np.isfinite(values) & (values > 0)
    return np.log10(N[keep]), np.log10(values[keep])


def _decade_range(values: np.ndarray) -> Tuple[float, float]:
    low, high = math.floor(values.min()), math.ceil(values.max())
    if high == low:
        high = low + 1
    return float(low), float(high)


def _num(x: float) -> str:
    return f"{x:.3f}"


def _distinct_labels(labels: Sequence[str]) -> List[str]:
    out, seen = [], {}
    for label in labels:
        count = seen.get(label, 0)
        seen[label] = count + 1
        out.append(label if count == 0 else f"{label} ({count + 1})")
    return out


def render_svg(series: Sequence[Tuple[str, np.ndarray, np.ndarray]], a: float, b: float,
               column: str = "err_succ_var") -> str:
    """
    SVG document for already log-transformed series.

    Args:
        series: (label, log10 N, log10 metric) per trace, nonempty
        a: Batch growth exponent of the guide lines
        b: Learning-rate exponent of the guide lines
        column: Metric name for the axis label

    Returns:
        SVG text
    """
    rates = theoretical_rates(a, b)
    all_x = np.concatenate([s[1] for s in series])
    all_y = np.concatenate([s[2] for s in series])
    axes = LogAxes(_decade_range(all_x), _decade_range(all_y))
    left, top, width, height = axes.box

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(column)} vs N</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        '<defs><clipPath id="plot-area">'
        f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(width)}" height="{_num(height)}"/>'
        "</clipPath></defs>",
        f'<g class="axes" data-log-x="{_num(axes.x_range[0])} {_num(axes.x_range[1])}" '
        f'data-log-y="{_num(axes.y_range[0])} {_num(axes.y_range[1])}" '
        f'data-plot-box="{" ".join(_num(v) for v in axes.box)}" '
        'stroke="#000000" fill="none" font-family="sans-serif" font-size="11">',
        f'<rect x="{_num(left)}" y="{_num(top)}" width="{_num(width)}" height="{_num(height)}"/>',
    ]

    # decade ticks
    for k in range(int(axes.x_range[0]), int(axes.x_range[1]) + 1):
        px, _ = axes.to_pixels(k, axes.y_range[0])
        out.append(f'<line x1="{_num(px)}" y1="{_num(top + height)}" x2="{_num(px)}" y2="{_num(top + height + 5)}"/>')
        out.append(f'<text x="{_num(px)}" y="{_num(top + height + 18)}" stroke="none" fill="#000000" '
                   f'text-anchor="middle">1e{k}</text>')
    for k in range(int(axes.y_range[0]), int(axes.y_range[1]) + 1):
        _, py = axes.to_pixels(axes.x_range[0], k)
        out.append(f'<line x1="{_num(left - 5)}" y1="{_num(py)}" x2="{_num(left)}" y2="{_num(py)}"/>')
        out.append(f'<text x="{_num(left - 8)}" y="{_num(py + 4)}" stroke="none" fill="#000000" '
                   f'text-anchor="end">1e{k}</text>')
    out.append(f'<text x="{_num(left + width / 2)}" y="{_num(HEIGHT - 12)}" stroke="none" fill="#000000" '
               'text-anchor="middle">N (samples per side)</text>')
    out.append(f'<text x="14" y="{_num(top + height / 2)}" stroke="none" fill="#000000" '
               f'text-anchor="middle" transform="rotate(-90 14 {_num(top + height / 2)})">{escape(column)}</text>')
    out.append("</g>")

    out.append('<g clip-path="url(#plot-area)" fill="none" stroke-width="1.5">')
    for i, (label, xs, ys) in enumerate(series):
        points = " ".join(f"{_num(px)},{_num(py)}" for px, py in (axes.to_pixels(x, y) for x, y in zip(xs, ys)))
        color = PALETTE[i % len(PALETTE)]
        out.append(f'<polyline class="trace" data-label={quoteattr(label)} stroke="{color}" points="{points}"/>')

    # guide lines through the last point of the first trace
    x0, y0 = float(series[0][1][-1]), float(series[0][2][-1])
    guides = (("new", f"new rate {float(rates.new_rate):.3f}", float(rates.new_rate)),
              ("old", f"old rate {float(rates.old_rate):.3f}", float(rates.old_rate)))
    for key, label, slope in guides:
        x1, x2 = axes.x_range
        p1 = axes.to_pixels(x1, y0 + slope * (x1 - x0))
        p2 = axes.to_pixels(x2, y0 + slope * (x2 - x0))
        out.append(
            f'<line class="guide" data-label={quoteattr(label)} data-slope="{slope:.6f}" stroke="#555555" '
            f'stroke-dasharray="{GUIDE_STYLE[key]}" x1="{_num(p1[0])}" y1="{_num(p1[1])}" '
            f'x2="{_num(p2[0])}" y2="{_num(p2[1])}"/>'
        )
    out.append("</g>")

    # legend
    legend_x = left + width + 16
    entries = [(label, PALETTE[i % len(PALETTE)], None) for i, (label, _, _) in enumerate(series)]
    entries += [(label, "#555555", GUIDE_STYLE[key]) for key, label, _ in guides]
    out.append('<g class="legend" font-family="sans-serif" font-size="11">')
    for i, (label, color, dash) in enumerate(entries):
        y = top + 12 + 18 * i
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{_num(legend_x)}" y1="{_num(y)}" x2="{_num(legend_x + 24)}" y2="{_num(y)}" '
                   f'stroke="{color}" stroke-width="1.5"{dash_attr}/>')
        out.append(f'<text x="{_num(legend_x + 30)}" y="{_num(y + 4)}" fill="#000000">{escape(label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(traces: Sequence[Union[str, Trace]], out_path: str, a: float, b: float,
              labels: Optional[Sequence[str]] = None, column: str = "err_succ_var") -> str:
    """
    Write a log-log SVG of `column` against N for one or more traces.

    Args:
        traces: Trace objects or CSV paths
        out_path: SVG destination
        a: Batch growth exponent for the guide lines
        b: Learning-rate exponent for the guide lines
        labels: Legend labels; file names or "trace k" by default
        column: Trace column to plot

    Returns:
        The path written
    """
    if not traces:
        raise ConfigurationError("emit_plot needs at least one trace")
    if labels is not None and len(labels) != len(traces):
        raise ConfigurationError(f"{len(labels)} labels for {len(traces)} traces")

    loaded: List[Trace] = []
    default_labels: List[str] = []
    for i, item in enumerate(traces):
        if isinstance(item, Trace):
            loaded.append(item)
            default_labels.append(f"trace {i + 1}")
        else:
            loaded.append(read_trace_csv(item))
            default_labels.append(os.path.splitext(os.path.basename(item))[0])

    series = []
    for label, trace in zip(_distinct_labels(labels or default_labels), loaded):
        xs, ys = _series(trace, column)
        if xs.size == 0:
            raise InsufficientDataError(f"trace '{label}' has no positive '{column}' values to plot")
        series.append((label, xs, ys))

    svg = render_svg(series, a, b, column)
    try:
        parent = os.path.dirname(out_path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(svg)
    except OSError as e:
        raise TraceIOError(f"cannot write plot: {e.strerror}", out_path)
    logging.info(f"Plot written to {out_path} ({len(series)} trace(s))")
    return out_path
