"""Dependency-free SVG line charts for trajectories and predictions.

Emits standalone SVG: one panel per health indicator stacked vertically,
truth as a solid dark line, one colored line per prediction source, and
one semi-transparent vertical band per maintenance event spanning the
whole figure (class "maint-band", so bands are countable in the output).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
TRUTH_COLOR = "#222222"

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 28, 34
_PANEL_H = 150


@dataclass
class Series:
    label: str
    values: np.ndarray
    color: str


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return [float(v) for v in raw]


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.2g}"
    return f"{v:.3g}"


def _polyline(xs, ys, color, width=1.2, dash=None) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
        f'{dash_attr} points="{pts}"/>'
    )


def plot_indicators(truth_by_hi: dict[str, np.ndarray],
                    predictions: dict[str, dict[str, np.ndarray]] | None = None,
                    maintenance_steps=(), title: str = "",
                    width: int = 860) -> str:
    """Stacked line panels, one per indicator.

    truth_by_hi maps indicator name -> (L,) series; predictions maps
    model name -> {indicator name -> series}. Maintenance steps become
    full-height bands behind all panels.
    """
    predictions = predictions or {}
    hi_names = list(truth_by_hi)
    n_panels = len(hi_names)
    if n_panels == 0:
        raise ValueError("nothing to plot")
    height = _MARGIN_T + n_panels * _PANEL_H + _MARGIN_B
    plot_w = width - _MARGIN_L - _MARGIN_R
    length = max(len(v) for v in truth_by_hi.values())
    x_of = lambda t: _MARGIN_L + (t / max(length - 1, 1)) * plot_w

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )
    # One band per maintenance event, spanning every panel.
    band_top = _MARGIN_T
    band_h = n_panels * _PANEL_H
    for step in maintenance_steps:
        x0 = x_of(max(step - 0.5, 0))
        x1 = x_of(min(step + 0.5, length - 1))
        parts.append(
            f'<rect class="maint-band" x="{x0:.2f}" y="{band_top}" '
            f'width="{max(x1 - x0, 2.0):.2f}" height="{band_h}" '
            f'fill="#808080" opacity="0.25"/>'
        )

    for panel, hi in enumerate(hi_names):
        top = _MARGIN_T + panel * _PANEL_H
        bottom = top + _PANEL_H - 24
        series = [Series("truth", np.asarray(truth_by_hi[hi], dtype=float), TRUTH_COLOR)]
        for k, (model, by_hi) in enumerate(predictions.items()):
            if hi in by_hi:
                series.append(Series(model, np.asarray(by_hi[hi], dtype=float),
                                     PALETTE[k % len(PALETTE)]))
        lo = min(float(np.min(s.values)) for s in series)
        hi_v = max(float(np.max(s.values)) for s in series)
        pad = 0.05 * (hi_v - lo or 1.0)
        lo, hi_v = lo - pad, hi_v + pad
        y_of = lambda v: bottom - (v - lo) / (hi_v - lo) * (bottom - top - 6)

        parts.append(
            f'<rect x="{_MARGIN_L}" y="{top}" width="{plot_w}" '
            f'height="{bottom - top}" fill="none" stroke="#cccccc"/>'
        )
        for tick in _ticks(lo, hi_v, 4):
            y = y_of(tick)
            parts.append(
                f'<text x="{_MARGIN_L - 6}" y="{y + 3:.2f}" text-anchor="end" '
                f'font-family="sans-serif" font-size="9" fill="#555">{_fmt_tick(tick)}</text>'
            )
        for s in series:
            xs = [x_of(t) for t in range(len(s.values))]
            ys = [y_of(v) for v in s.values]
            parts.append(_polyline(xs, ys, s.color, 1.4 if s.label == "truth" else 1.1))
        parts.append(
            f'<text x="{_MARGIN_L + 4}" y="{top + 12}" font-family="sans-serif" '
            f'font-size="10" fill="#333">{hi}</text>'
        )

    # x axis labels on the last panel
    axis_y = _MARGIN_T + n_panels * _PANEL_H - 8
    for t in np.linspace(0, length - 1, 5):
        parts.append(
            f'<text x="{x_of(t):.2f}" y="{axis_y + 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="9" fill="#555">{int(t)}</text>'
        )
    # legend
    legend_x = _MARGIN_L
    legend_y = height - 8
    entries = ["truth"] + list(predictions)
    colors = [TRUTH_COLOR] + [PALETTE[k % len(PALETTE)] for k in range(len(predictions))]
    for label, color in zip(entries, colors):
        parts.append(
            f'<rect x="{legend_x}" y="{legend_y - 8}" width="14" height="3" fill="{color}"/>'
        )
        parts.append(
            f'<text x="{legend_x + 18}" y="{legend_y - 3}" font-family="sans-serif" '
            f'font-size="10" fill="#333">{label}</text>'
        )
        legend_x += 22 + 7 * len(label)
    parts.append("</svg>")
    return "\n".join(parts)


def acf_bar_chart(values: np.ndarray, title: str, conf_band: float | None = None,
                  width: int = 640, height: int = 240) -> str:
    """Stem chart for ACF/PACF values over lags 0..len-1."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    plot_w = width - _MARGIN_L - _MARGIN_R
    top, bottom = _MARGIN_T, height - _MARGIN_B
    lo, hi = min(-0.1, float(values.min()) - 0.05), 1.05
    y_of = lambda v: bottom - (v - lo) / (hi - lo) * (bottom - top)
    x_of = lambda k: _MARGIN_L + (k / max(n - 1, 1)) * plot_w
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="16" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{title}</text>',
        f'<line x1="{_MARGIN_L}" y1="{y_of(0):.2f}" x2="{width - _MARGIN_R}" '
        f'y2="{y_of(0):.2f}" stroke="#999"/>',
    ]
    if conf_band:
        for sgn in (1, -1):
            y = y_of(sgn * conf_band)
            parts.append(
                f'<line x1="{_MARGIN_L}" y1="{y:.2f}" x2="{width - _MARGIN_R}" '
                f'y2="{y:.2f}" stroke="#1f77b4" stroke-dasharray="4,3"/>'
            )
    for k, v in enumerate(values):
        x = x_of(k)
        parts.append(
            f'<line x1="{x:.2f}" y1="{y_of(0):.2f}" x2="{x:.2f}" y2="{y_of(v):.2f}" '
            f'stroke="#d62728" stroke-width="2"/>'
        )
    for k in range(0, n, max(n // 8, 1)):
        parts.append(
            f'<text x="{x_of(k):.2f}" y="{bottom + 14}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="9" fill="#555">{k}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
