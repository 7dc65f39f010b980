"""Heatmap grids (dataset size x epoch) and a dependency-free SVG renderer."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["HeatmapGrid", "HeatmapStyle", "color_for", "render_heatmap"]


@dataclass
class HeatmapGrid:
    """Mean metric per (row, column); rows are dataset sizes, columns epochs."""

    row_labels: list[int]
    col_labels: list[int]
    cells: np.ndarray
    metric: str = "value"
    row_name: str = "n"
    vmin: float | None = None
    vmax: float | None = None

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.shape != (len(self.row_labels), len(self.col_labels)):
            raise ValueError(
                f"cells shape {self.cells.shape} does not match "
                f"{len(self.row_labels)} rows x {len(self.col_labels)} columns"
            )
        for name, labels in (("row", self.row_labels), ("column", self.col_labels)):
            if any(b <= a for a, b in zip(labels, labels[1:])):
                raise ValueError(f"{name} labels must be strictly increasing")

    @property
    def bounds(self) -> tuple[float, float]:
        lo = float(np.min(self.cells)) if self.vmin is None else float(self.vmin)
        hi = float(np.max(self.cells)) if self.vmax is None else float(self.vmax)
        return lo, hi

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([self.row_name] + [str(c) for c in self.col_labels])
            for label, row in zip(self.row_labels, self.cells):
                w.writerow([str(label)] + [format(float(v), ".17g") for v in row])

    @classmethod
    def from_csv(cls, path, metric: str | None = None) -> "HeatmapGrid":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 2 or len(rows[0]) < 2:
            raise ValueError(f"{path}: a heatmap CSV needs a header and at least one data row")
        header = rows[0]
        try:
            cols = [int(c) for c in header[1:]]
            labels = [int(r[0]) for r in rows[1:]]
            cells = [[float(v) for v in r[1:]] for r in rows[1:]]
        except ValueError as exc:
            raise ValueError(f"{path}: malformed heatmap CSV ({exc})") from None
        if metric is None:
            metric = Path(path).stem
        return cls(labels, cols, np.array(cells), metric=metric, row_name=header[0])


@dataclass(frozen=True)
class HeatmapStyle:
    cell_width: float = 24.0
    cell_height: float = 18.0
    margin_left: float = 70.0
    margin_top: float = 40.0
    margin_right: float = 20.0
    margin_bottom: float = 60.0
    font_size: float = 10.0
    max_col_labels: int = 10


def color_for(value: float, lo: float, hi: float) -> tuple[float, float, float]:
    """Linear blue (lo) to red (hi) map as RGB percentages; a flat scale maps
    to the midpoint."""
    if hi > lo:
        t = (value - lo) / (hi - lo)
    else:
        t = 0.5
    t = min(max(t, 0.0), 1.0)
    return 100.0 * t, 0.0, 100.0 * (1.0 - t)


def _rgb(c: tuple[float, float, float]) -> str:
    return "rgb({:.4f}%,{:.4f}%,{:.4f}%)".format(*c)


def _num(v: float) -> str:
    return format(v, ".6g")


def render_heatmap(grid: HeatmapGrid, path=None, style: HeatmapStyle = HeatmapStyle()) -> str:
    """Render ``grid`` as SVG text (and write it to ``path`` if given).

    One rectangle per cell, rows top to bottom in label order, columns left
    to right. The colour bounds are stored in the ``<metadata>`` element.
    Output is a pure function of the inputs.
    """
    cells = grid.cells
    if cells.size == 0:
        raise ValueError("cannot render an empty heatmap")
    if not np.all(np.isfinite(cells)):
        raise ValueError("heatmap cells must all be finite")
    lo, hi = grid.bounds
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("heatmap bounds must be finite")
    n_rows, n_cols = cells.shape
    s = style
    plot_w = n_cols * s.cell_width
    plot_h = n_rows * s.cell_height
    width = s.margin_left + plot_w + s.margin_right
    height = s.margin_top + plot_h + s.margin_bottom

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_num(width)}" height="{_num(height)}" '
        f'viewBox="0 0 {_num(width)} {_num(height)}">',
        f'<metadata>metric={escape(grid.metric)};vmin={lo!r};vmax={hi!r}</metadata>',
        f'<title>{escape(grid.metric)}</title>',
        f'<g font-family="sans-serif" font-size="{_num(s.font_size)}">',
        f'<text x="{_num(s.margin_left + plot_w / 2)}" y="{_num(s.margin_top / 2)}" '
        f'text-anchor="middle">{escape(grid.metric)} (min {_num(lo)}, max {_num(hi)})</text>',
    ]
    out.append('<g class="cells">')
    for i in range(n_rows):
        y = s.margin_top + i * s.cell_height
        for j in range(n_cols):
            x = s.margin_left + j * s.cell_width
            out.append(
                f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(s.cell_width)}" '
                f'height="{_num(s.cell_height)}" fill="{_rgb(color_for(cells[i, j], lo, hi))}"/>'
            )
    out.append("</g>")
    out.append('<g class="row-labels" text-anchor="end">')
    for i, label in enumerate(grid.row_labels):
        y = s.margin_top + (i + 0.5) * s.cell_height + s.font_size / 3
        out.append(f'<text x="{_num(s.margin_left - 4)}" y="{_num(y)}">{label}</text>')
    out.append("</g>")
    step = max(1, math.ceil(n_cols / s.max_col_labels))
    out.append('<g class="col-labels" text-anchor="middle">')
    for j in range(0, n_cols, step):
        x = s.margin_left + (j + 0.5) * s.cell_width
        out.append(
            f'<text x="{_num(x)}" y="{_num(s.margin_top + plot_h + s.font_size + 4)}">'
            f"{grid.col_labels[j]}</text>"
        )
    out.append("</g>")
    out.append(
        f'<text x="{_num(s.margin_left + plot_w / 2)}" y="{_num(height - 10)}" '
        f'text-anchor="middle">epoch</text>'
    )
    out.append(
        f'<text x="14" y="{_num(s.margin_top + plot_h / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 14 {_num(s.margin_top + plot_h / 2)})">'
        f"{escape(grid.row_name)}</text>"
    )
    out.append("</g>")
    out.append("</svg>")
    svg = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(svg, encoding="utf-8")
    return svg
