"""Minimal SVG polyline charts for distance profiles."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .pdp import DistanceProfile, mean_profile

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


@dataclass(frozen=True)
class PlotOptions:
    width: int = 640
    height: int = 400
    margin: int = 48
    x_label: str = "Time"
    y_label: str = "Distance"
    y_max: float | None = None  # default: data maximum (at least a tiny epsilon)


def render_profiles_svg(
    profiles: list[tuple[str, DistanceProfile]],
    options: PlotOptions = PlotOptions(),
    include_mean: bool = False,
    mean_points: int = 200,
) -> str:
    """SVG chart with one polyline per profile, x in [0, 1]."""
    if not profiles:
        raise ValueError("no profiles to plot")
    series = list(profiles)
    if include_mean:
        series.append(
            ("mean", mean_profile([p for _, p in profiles], mean_points))
        )
    y_max = options.y_max
    if y_max is None:
        y_max = max(float(p.values.max()) for _, p in series)
        y_max = max(y_max, 1e-9)

    m = options.margin
    plot_w = options.width - 2 * m
    plot_h = options.height - 2 * m

    def sx(t: float) -> float:
        return m + t * plot_w

    def sy(v: float) -> float:
        return m + (1.0 - v / y_max) * plot_h

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{options.width}" '
        f'height="{options.height}" viewBox="0 0 {options.width} {options.height}">',
        f'<rect x="{m}" y="{m}" width="{plot_w}" height="{plot_h}" '
        'fill="white" stroke="#333"/>',
    ]
    # axis ticks at 0, 0.5, 1 on x; 0, y_max/2, y_max on y
    for t in (0.0, 0.5, 1.0):
        lines.append(
            f'<text x="{sx(t):.2f}" y="{options.height - m + 16}" '
            f'font-size="11" text-anchor="middle">{t:g}</text>'
        )
    for v in (0.0, y_max / 2, y_max):
        lines.append(
            f'<text x="{m - 6}" y="{sy(v) + 4:.2f}" font-size="11" '
            f'text-anchor="end">{v:.3g}</text>'
        )
    lines.append(
        f'<text x="{options.width / 2:.0f}" y="{options.height - 8}" font-size="12" '
        f'text-anchor="middle">{escape(options.x_label)}</text>'
    )
    lines.append(
        f'<text x="14" y="{options.height / 2:.0f}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 14 {options.height / 2:.0f})">{escape(options.y_label)}</text>'
    )
    for k, (label, profile) in enumerate(series):
        color = "#000000" if (include_mean and k == len(series) - 1) else PALETTE[k % len(PALETTE)]
        pts = " ".join(
            f"{sx(t):.3f},{sy(min(v, y_max)):.3f}"
            for t, v in zip(profile.axis, profile.values)
        )
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>'
        )
        ly = m + 14 + 14 * k
        lines.append(
            f'<line x1="{options.width - m - 70}" y1="{ly - 4}" '
            f'x2="{options.width - m - 50}" y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>'
        )
        lines.append(
            f'<text x="{options.width - m - 44}" y="{ly}" '
            f'font-size="11">{escape(label)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines)


def save_svg(svg: str, path) -> None:
    Path(path).write_text(svg)
