"""Query-result tables (CSV/JSON) and hand-emitted SVG time-series charts.

SVG output uses a fixed 1200x400 canvas and fixed-precision coordinates so
identical inputs render byte-identical files.
"""
from __future__ import annotations

import json
from datetime import datetime, timezone

from .config import iso_utc

CANVAS_W = 1200
CANVAS_H = 400
MARGIN_L = 60
MARGIN_R = 20
MARGIN_T = 30
MARGIN_B = 40

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f")


def render_table(results, fmt: str) -> str:
    """Serialize CellResults; key components join with '/' in CSV."""
    if fmt == "csv":
        lines = ["key,value,count"]
        for r in results:
            key = "/".join(str(k) for k in r.key)
            lines.append(f"{key},{r.value:.6f},{r.count}")
        return "\n".join(lines) + "\n"
    if fmt == "json":
        payload = [{"key": list(r.key), "value": r.value, "count": r.count} for r in results]
        return json.dumps(payload, indent=2, default=str) + "\n"
    raise ValueError(f"unknown table format {fmt!r}")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_timeseries_svg(series, weather=None, title: str = "",
                          y_label: str = "") -> str:
    """Line chart of (label, [(utc_s, value), ...]) series with optional
    daily-weather overlay: precipitation bars along the bottom and a
    min/max temperature band behind the lines."""
    plot_w = CANVAS_W - MARGIN_L - MARGIN_R
    plot_h = CANVAS_H - MARGIN_T - MARGIN_B

    points = [(t, v) for _, pts in series for t, v in pts]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS_W}" height="{CANVAS_H}">',
           f'<rect width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>']
    if title:
        out.append(f'<text x="{CANVAS_W / 2:.0f}" y="20" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="14">{title}</text>')
    if not points:
        out.append('<text x="600" y="200" text-anchor="middle" '
                   'font-family="sans-serif" font-size="12">no data</text></svg>')
        return "\n".join(out) + "\n"

    t_lo = min(t for t, _ in points)
    t_hi = max(t for t, _ in points)
    v_lo = min(v for _, v in points)
    v_hi = max(v for _, v in points)
    if t_hi == t_lo:
        t_hi = t_lo + 1
    if v_hi == v_lo:
        v_hi = v_lo + 1.0
    pad = 0.05 * (v_hi - v_lo)
    v_lo -= pad
    v_hi += pad

    def x(t):
        return MARGIN_L + plot_w * (t - t_lo) / (t_hi - t_lo)

    def y(v):
        return MARGIN_T + plot_h * (1.0 - (v - v_lo) / (v_hi - v_lo))

    weather_days = _overlay_days(weather, t_lo, t_hi)
    if weather_days:
        band = _temperature_band(weather_days, x, v_lo, v_hi, y)
        if band:
            out.append(f'<polygon points="{band}" fill="#f0d0d0" fill-opacity="0.5"/>')

    # axes and ticks
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" '
               f'fill="none" stroke="#404040"/>')
    for i in range(5):
        v = v_lo + (v_hi - v_lo) * i / 4
        yy = _fmt(y(v))
        out.append(f'<line x1="{MARGIN_L - 4}" y1="{yy}" x2="{MARGIN_L}" y2="{yy}" '
                   f'stroke="#404040"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{yy}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="10">{v:.1f}</text>')
    n_xticks = 6
    for i in range(n_xticks + 1):
        t = t_lo + (t_hi - t_lo) * i / n_xticks
        xx = _fmt(x(t))
        out.append(f'<line x1="{xx}" y1="{MARGIN_T + plot_h}" x2="{xx}" '
                   f'y2="{MARGIN_T + plot_h + 4}" stroke="#404040"/>')
        out.append(f'<text x="{xx}" y="{MARGIN_T + plot_h + 16}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="9">{iso_utc(t)[:10]}</text>')
    if y_label:
        out.append(f'<text x="14" y="{MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11" '
                   f'transform="rotate(-90 14 {MARGIN_T + plot_h / 2:.0f})">{y_label}</text>')

    if weather_days:
        out.extend(_precip_bars(weather_days, x, plot_h))

    for idx, (label, pts) in enumerate(series):
        if not pts:
            continue
        color = PALETTE[idx % len(PALETTE)]
        path = " ".join(f"{_fmt(x(t))},{_fmt(y(v))}" for t, v in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                   f'stroke-width="1.2"/>')
        out.append(f'<text x="{MARGIN_L + 8}" y="{MARGIN_T + 14 + 13 * idx}" '
                   f'font-family="sans-serif" font-size="11" fill="{color}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _overlay_days(weather, t_lo, t_hi):
    if not weather:
        return []
    days = weather.values() if isinstance(weather, dict) else weather
    out = []
    for day in sorted(days, key=lambda d: d.date):
        start = int(datetime.strptime(day.date, "%Y-%m-%d")
                    .replace(tzinfo=timezone.utc).timestamp())
        if start + 86_400 < t_lo or start > t_hi:
            continue
        out.append((start, day))
    return out


def _temperature_band(days, x, v_lo, v_hi, y):
    if not days:
        return ""
    top = []
    bottom = []
    for start, day in days:
        mid = start + 43_200
        top.append((mid, day.tmax_c))
        bottom.append((mid, day.tmin_c))
    pts = top + bottom[::-1]
    clamped = [(t, min(v_hi, max(v_lo, v))) for t, v in pts]
    return " ".join(f"{_fmt(x(t))},{_fmt(y(v))}" for t, v in clamped)


def _precip_bars(days, x, plot_h):
    max_precip = max((day.precipitation_mm for _, day in days), default=0.0)
    if max_precip <= 0:
        return []
    bar_zone = 0.2 * plot_h
    base = MARGIN_T + plot_h
    out = []
    for start, day in days:
        if day.precipitation_mm <= 0:
            continue
        h = bar_zone * day.precipitation_mm / max_precip
        x0 = x(start + 21_600)
        x1 = x(start + 64_800)
        out.append(f'<rect x="{_fmt(x0)}" y="{_fmt(base - h)}" '
                   f'width="{_fmt(x1 - x0)}" height="{_fmt(h)}" '
                   f'fill="#4a90d9" fill-opacity="0.6"/>')
    return out
