"""Static SVG chart of evaluation success rate against epoch."""

from __future__ import annotations

import csv
from pathlib import Path
from xml.sax.saxutils import escape

from ..errors import FormatError

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 60, "right": 150, "top": 20, "bottom": 50}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _read_curve(path: Path) -> list[tuple[float, float]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            if "epoch" not in fields or "eval_success_rate" not in fields:
                raise FormatError(f"{path}: missing epoch/eval_success_rate columns")
            points = [(float(r["epoch"]), float(r["eval_success_rate"])) for r in reader]
    except (ValueError, TypeError) as exc:
        raise FormatError(f"{path}: unreadable metrics row ({exc})") from None
    if not points:
        raise FormatError(f"{path}: no metrics rows")
    return points


def emit_plot(metric_csv_paths: list[str | Path], out_path: str | Path) -> None:
    paths = [Path(p) for p in metric_csv_paths]
    if not paths:
        raise FormatError("no metrics files given")
    curves = [(p.stem if p.stem != "metrics" else p.parent.name or p.stem, _read_curve(p)) for p in paths]

    x_max = max(max(x for x, _ in pts) for _, pts in curves)
    x_min = min(min(x for x, _ in pts) for _, pts in curves)
    if x_max == x_min:
        x_max = x_min + 1
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y):
        return MARGIN["top"] + (1.0 - y) * plot_h

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    x0, y0, y1 = MARGIN["left"], sy(0.0), sy(1.0)
    out.append(f'<line class="axis" x1="{x0}" y1="{y0:.2f}" x2="{x0 + plot_w}" y2="{y0:.2f}" stroke="black"/>')
    out.append(f'<line class="axis" x1="{x0}" y1="{y0:.2f}" x2="{x0}" y2="{y1:.2f}" stroke="black"/>')
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{x0 - 8}" y="{sy(tick) + 4:.2f}" font-size="11" text-anchor="end">{tick:.2f}</text>')
    for tick in sorted({x_min, (x_min + x_max) / 2, x_max}):
        out.append(f'<text x="{sx(tick):.2f}" y="{y0 + 16:.2f}" font-size="11" text-anchor="middle">{tick:g}</text>')
    out.append(f'<text x="{x0 + plot_w / 2:.2f}" y="{HEIGHT - 10}" font-size="13" text-anchor="middle">epoch</text>')
    out.append(f'<text x="15" y="{MARGIN["top"] + plot_h / 2:.2f}" font-size="13" text-anchor="middle" '
               f'transform="rotate(-90 15 {MARGIN["top"] + plot_h / 2:.2f})">eval success rate</text>')
    for i, (label, pts) in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        ly = MARGIN["top"] + 10 + 18 * i
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<g class="legend"><line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" '
                   f'stroke-width="2"/><text x="{lx + 26}" y="{ly + 4}" font-size="12">{escape(label)}</text></g>')
    out.append("</svg>")
    Path(out_path).write_text("\n".join(out) + "\n", encoding="utf-8")
