"""Minimal self-contained SVG charts (heat map, line chart)."""
from __future__ import annotations

from html import escape

_PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _color(t: float) -> str:
    # white -> dark red
    t = min(max(t, 0.0), 1.0)
    r = int(255 - 120 * t)
    gb = int(255 * (1 - t))
    return f"#{r:02x}{gb:02x}{gb:02x}"


def heatmap(values, row_labels, col_labels, title="", row_title="", col_title="", vmax=None) -> str:
    """``values[i][j]`` is drawn at row ``i`` (top to bottom), column ``j``."""
    rows, cols = len(row_labels), len(col_labels)
    cell, left, top = 44, 70, 50
    width, height = left + cols * cell + 20, top + rows * cell + 50
    flat = [v for row in values for v in row]
    vmax = max(flat) if vmax is None else vmax
    vmax = vmax or 1.0
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for i in range(rows):
        for j in range(cols):
            v = values[i][j]
            x, y = left + j * cell, top + i * cell
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{_color(v / vmax)}" stroke="#fff"/>')
            out.append(f'<text x="{x + cell / 2}" y="{y + cell / 2 + 4}" text-anchor="middle">{v:.1f}</text>')
        out.append(f'<text x="{left - 6}" y="{top + i * cell + cell / 2 + 4}" text-anchor="end">{escape(str(row_labels[i]))}</text>')
    for j in range(cols):
        out.append(f'<text x="{left + j * cell + cell / 2}" y="{top + rows * cell + 16}" text-anchor="middle">{escape(str(col_labels[j]))}</text>')
    out.append(f'<text x="{left + cols * cell / 2}" y="{height - 8}" text-anchor="middle">{escape(col_title)}</text>')
    out.append(f'<text x="14" y="{top + rows * cell / 2}" text-anchor="middle" transform="rotate(-90 14 {top + rows * cell / 2})">{escape(row_title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def line_chart(series: dict, title="", x_title="", y_title="", dashed: dict | None = None) -> str:
    """``series`` maps a name to ``(xs, ys)``; ``dashed`` maps a name to a
    horizontal reference level drawn in the same colour."""
    dashed = dashed or {}
    width, height, left, right, top, bottom = 560, 360, 60, 130, 40, 45
    xs = [x for xs_, _ in series.values() for x in xs_]
    ys = [y for _, ys_ in series.values() for y in ys_] + list(dashed.values())
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(0.0, min(ys)), max(ys)
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
           f'<text x="{left + pw / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>']
    for k in range(5):
        yv = y0 + (y1 - y0) * k / 4
        xv = x0 + (x1 - x0) * k / 4
        out.append(f'<text x="{left - 6}" y="{_fmt(sy(yv) + 4)}" text-anchor="end">{yv:.4g}</text>')
        out.append(f'<text x="{_fmt(sx(xv))}" y="{top + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
    for idx, (name, (xs_, ys_)) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs_, ys_))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        if name in dashed:
            yv = sy(dashed[name])
            out.append(f'<line x1="{left}" y1="{_fmt(yv)}" x2="{left + pw}" y2="{_fmt(yv)}" stroke="{color}" stroke-dasharray="5,4"/>')
        ly = top + 14 * idx + 8
        out.append(f'<line x1="{left + pw + 10}" y1="{ly}" x2="{left + pw + 28}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 32}" y="{ly + 4}">{escape(str(name))}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">{escape(x_title)}</text>')
    out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">{escape(y_title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
