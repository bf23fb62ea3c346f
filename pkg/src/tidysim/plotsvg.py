"""Small-multiples SVG charts for aggregate tables: lines plus point-ranges.

Deliberately minimal and dependency-free: numeric x/y axes, one panel per
facet level, color and dash-pattern series, interval whiskers from the
``<y>_lo`` / ``<y>_hi`` columns when present, and a legend.  Output is
plain SVG 1.1 text, byte-identical across invocations for the same input.
"""

from __future__ import annotations

import math
from typing import Any, Sequence

import numpy as np

from .errors import PlotError
from .tableio import Column, Table

PALETTE = ("#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02")
DASHES = ("", "6,4", "2,3", "8,3,2,3", "1,2")

PANEL_W = 260.0
PANEL_H = 200.0
MARGIN_LEFT = 58.0
MARGIN_BOTTOM = 46.0
MARGIN_TOP = 16.0
STRIP_H = 20.0
PANEL_GAP = 14.0
LEGEND_W = 150.0
MAX_COLS = 3


def _fmt_level(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:g}"
    return str(v)


def _fmt_num(v: float) -> str:
    return f"{v:g}"


def _coord(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def parse_level(col: Column, text: str) -> Any:
    """Parse a command-line literal into the column's value domain."""
    try:
        if col.dtype in ("integer", "uint64"):
            return int(text)
        if col.dtype == "real":
            return float(text)
        if col.dtype == "boolean":
            if text.lower() in ("true", "1"):
                return True
            if text.lower() in ("false", "0"):
                return False
            raise ValueError(text)
        return text
    except ValueError:
        raise PlotError(f"cannot parse {text!r} as a {col.dtype} level") from None


def distinct_levels(col: Column) -> list:
    """Distinct values in display order (level order, numeric order, F<T)."""
    if col.dtype == "categorical":
        present = sorted(set(col.values.tolist()))
        return [col.categories[i] for i in present]
    values = [col.item(i) for i in range(len(col))]
    return sorted(set(values))


def filter_levels(table: Table, column: str, levels: Sequence[str]) -> Table:
    """Keep rows whose value is one of ``levels``; unknown levels error."""
    col = table.column(column)
    wanted = [parse_level(col, str(lv)) for lv in levels]
    available = distinct_levels(col)
    missing = [lv for lv in wanted if lv not in available]
    if missing:
        raise PlotError(
            f"column {column!r} has no level(s) {missing}; available: "
            f"{', '.join(_fmt_level(a) for a in available)}")
    values = [col.item(i) for i in range(table.n_rows)]
    keep = np.array([v in wanted for v in values], dtype=bool)
    return table.take(np.flatnonzero(keep))


def _nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0, 1.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks or [lo, hi]


def _numeric_values(table: Table, name: str) -> np.ndarray:
    col = table.column(name)
    if col.dtype not in ("integer", "real", "uint64"):
        raise PlotError(f"column {name!r} must be numeric to map to an axis, "
                        f"is {col.dtype}")
    vals = col.values.astype(np.float64)
    if col.mask is not None:
        vals = vals[col.mask]
    return vals


class _Scale:
    def __init__(self, lo: float, hi: float, out_lo: float, out_hi: float):
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        pad = 0.05 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad
        self.out_lo, self.out_hi = out_lo, out_hi

    def __call__(self, v: float) -> float:
        frac = (v - self.lo) / (self.hi - self.lo)
        return self.out_lo + frac * (self.out_hi - self.out_lo)

    def ticks(self) -> list[float]:
        return [t for t in _nice_ticks(self.lo, self.hi)
                if self.lo <= t <= self.hi]


def render_plot(table: Table, x: str, y: str,
                color: str | None = None,
                linetype: str | None = None,
                facet: str | None = None,
                filters: dict[str, Sequence[str]] | None = None,
                title: str | None = None) -> str:
    """Render the aggregate table as a faceted line + point-range SVG chart."""
    for name in filter(None, (x, y, color, linetype, facet)):
        if name not in table:
            raise PlotError(f"no column {name!r} in the table; available: "
                            f"{', '.join(table.names)}")
    for column, levels in (filters or {}).items():
        table = filter_levels(table, column, levels)
    if table.n_rows == 0:
        raise PlotError("nothing to plot after filtering")

    y_lo_name = f"{y}_lo" if f"{y}_lo" in table else None
    y_hi_name = f"{y}_hi" if f"{y}_hi" in table else None

    facet_levels = distinct_levels(table.column(facet)) if facet else [None]
    color_levels = distinct_levels(table.column(color)) if color else [None]
    line_levels = distinct_levels(table.column(linetype)) if linetype else [None]

    x_vals = _numeric_values(table, x)
    y_all = [_numeric_values(table, y)]
    if y_lo_name:
        y_all.append(_numeric_values(table, y_lo_name))
    if y_hi_name:
        y_all.append(_numeric_values(table, y_hi_name))
    y_vals = np.concatenate(y_all)
    if not len(x_vals) or not len(y_vals):
        raise PlotError("no data points to plot")

    n_panels = len(facet_levels)
    n_cols = min(MAX_COLS, n_panels)
    n_rows_p = -(-n_panels // n_cols)
    legend_w = LEGEND_W if (color or linetype) else 10.0
    title_h = 24.0 if title else 0.0
    width = MARGIN_LEFT + n_cols * PANEL_W + (n_cols - 1) * PANEL_GAP + legend_w
    height = (title_h + MARGIN_TOP + n_rows_p * (STRIP_H + PANEL_H)
              + (n_rows_p - 1) * PANEL_GAP + MARGIN_BOTTOM)

    rows = [table.row(i) for i in range(table.n_rows)]

    parts: list[str] = []
    parts.append('<?xml version="1.0" encoding="UTF-8"?>')
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_coord(width)}" height="{_coord(height)}" '
        f'viewBox="0 0 {_coord(width)} {_coord(height)}">')
    parts.append(f'<rect width="{_coord(width)}" height="{_coord(height)}" '
                 'fill="white"/>')
    if title:
        parts.append(
            f'<text x="{_coord(width / 2)}" y="16" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" font-weight="bold">'
            f'{_esc(title)}</text>')

    for p, facet_level in enumerate(facet_levels):
        col_i = p % n_cols
        row_i = p // n_cols
        px = MARGIN_LEFT + col_i * (PANEL_W + PANEL_GAP)
        py = title_h + MARGIN_TOP + row_i * (STRIP_H + PANEL_H + PANEL_GAP)

        panel_rows = [r for r in rows
                      if facet is None or r[facet] == facet_level]
        xs = _Scale(float(x_vals.min()), float(x_vals.max()), px, px + PANEL_W)
        ys = _Scale(float(y_vals.min()), float(y_vals.max()),
                    py + STRIP_H + PANEL_H, py + STRIP_H)

        if facet is not None:
            parts.append(f'<rect x="{_coord(px)}" y="{_coord(py)}" '
                         f'width="{_coord(PANEL_W)}" height="{_coord(STRIP_H)}" '
                         'fill="#d9d9d9"/>')
            parts.append(
                f'<text x="{_coord(px + PANEL_W / 2)}" y="{_coord(py + 14)}" '
                'text-anchor="middle" font-family="sans-serif" font-size="11">'
                f'{_esc(f"{facet}: {_fmt_level(facet_level)}")}</text>')
        parts.append(f'<rect x="{_coord(px)}" y="{_coord(py + STRIP_H)}" '
                     f'width="{_coord(PANEL_W)}" height="{_coord(PANEL_H)}" '
                     'fill="none" stroke="#333333" stroke-width="1"/>')

        for t in xs.ticks():
            tx = xs(t)
            parts.append(f'<line x1="{_coord(tx)}" y1="{_coord(py + STRIP_H + PANEL_H)}" '
                         f'x2="{_coord(tx)}" y2="{_coord(py + STRIP_H + PANEL_H + 4)}" '
                         'stroke="#333333"/>')
            parts.append(
                f'<text x="{_coord(tx)}" y="{_coord(py + STRIP_H + PANEL_H + 16)}" '
                'text-anchor="middle" font-family="sans-serif" font-size="10">'
                f'{_fmt_num(t)}</text>')
        if col_i == 0:
            for t in ys.ticks():
                ty = ys(t)
                parts.append(f'<line x1="{_coord(px - 4)}" y1="{_coord(ty)}" '
                             f'x2="{_coord(px)}" y2="{_coord(ty)}" stroke="#333333"/>')
                parts.append(
                    f'<text x="{_coord(px - 7)}" y="{_coord(ty + 3)}" '
                    'text-anchor="end" font-family="sans-serif" font-size="10">'
                    f'{_fmt_num(t)}</text>')

        for ci, c_level in enumerate(color_levels):
            for li, l_level in enumerate(line_levels):
                series = [r for r in panel_rows
                          if (color is None or r[color] == c_level)
                          and (linetype is None or r[linetype] == l_level)]
                series = [r for r in series
                          if r[x] is not None and r[y] is not None]
                if not series:
                    continue
                series.sort(key=lambda r: r[x])
                stroke = PALETTE[ci % len(PALETTE)]
                dash = DASHES[li % len(DASHES)]
                dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
                points = " ".join(
                    f"{_coord(xs(r[x]))},{_coord(ys(r[y]))}" for r in series)
                parts.append(f'<polyline points="{points}" fill="none" '
                             f'stroke="{stroke}" stroke-width="1.5"{dash_attr}/>')
                for r in series:
                    cx, cy = xs(r[x]), ys(r[y])
                    if y_lo_name and y_hi_name and r[y_lo_name] is not None \
                            and r[y_hi_name] is not None:
                        parts.append(
                            f'<line x1="{_coord(cx)}" y1="{_coord(ys(r[y_lo_name]))}" '
                            f'x2="{_coord(cx)}" y2="{_coord(ys(r[y_hi_name]))}" '
                            f'stroke="{stroke}" stroke-width="1.2"/>')
                    parts.append(f'<circle cx="{_coord(cx)}" cy="{_coord(cy)}" '
                                 f'r="2.5" fill="{stroke}"/>')

        x_label_y = py + STRIP_H + PANEL_H + 32
        parts.append(
            f'<text x="{_coord(px + PANEL_W / 2)}" y="{_coord(x_label_y)}" '
            'text-anchor="middle" font-family="sans-serif" font-size="11">'
            f'{_esc(x)}</text>')
    y_mid = title_h + MARGIN_TOP + (n_rows_p * (STRIP_H + PANEL_H)) / 2
    parts.append(
        f'<text x="14" y="{_coord(y_mid)}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 14 {_coord(y_mid)})">{_esc(y)}</text>')

    if color or linetype:
        lx = MARGIN_LEFT + n_cols * PANEL_W + (n_cols - 1) * PANEL_GAP + 16
        ly = title_h + MARGIN_TOP + STRIP_H + 8
        if color:
            parts.append(f'<text x="{_coord(lx)}" y="{_coord(ly)}" '
                         'font-family="sans-serif" font-size="11" '
                         f'font-weight="bold">{_esc(color)}</text>')
            ly += 8
            for ci, level in enumerate(color_levels):
                ly += 16
                stroke = PALETTE[ci % len(PALETTE)]
                parts.append(f'<line x1="{_coord(lx)}" y1="{_coord(ly - 4)}" '
                             f'x2="{_coord(lx + 22)}" y2="{_coord(ly - 4)}" '
                             f'stroke="{stroke}" stroke-width="2"/>')
                parts.append(f'<text x="{_coord(lx + 28)}" y="{_coord(ly)}" '
                             'font-family="sans-serif" font-size="10">'
                             f'{_esc(_fmt_level(level))}</text>')
            ly += 24
        if linetype:
            parts.append(f'<text x="{_coord(lx)}" y="{_coord(ly)}" '
                         'font-family="sans-serif" font-size="11" '
                         f'font-weight="bold">{_esc(linetype)}</text>')
            ly += 8
            for li, level in enumerate(line_levels):
                ly += 16
                dash = DASHES[li % len(DASHES)]
                dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
                parts.append(f'<line x1="{_coord(lx)}" y1="{_coord(ly - 4)}" '
                             f'x2="{_coord(lx + 22)}" y2="{_coord(ly - 4)}" '
                             f'stroke="#333333" stroke-width="2"{dash_attr}/>')
                parts.append(f'<text x="{_coord(lx + 28)}" y="{_coord(ly)}" '
                             'font-family="sans-serif" font-size="10">'
                             f'{_esc(_fmt_level(level))}</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"
