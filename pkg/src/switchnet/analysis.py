"""Per-neuron interpretability: activation heatmaps, attribution, exports.

Heatmaps aggregate ungated probe activations so every unit is observable on
every group, regardless of how the switch would gate it.
"""

import csv
from dataclasses import dataclass
from pathlib import Path
from xml.sax.saxutils import escape

from .data import Dataset
from .errors import AnalysisError
from .jsonio import write_json
from .network import ModularNetwork, probe_activations

STATISTICS = ("mean", "max")

_LIGHT = (247, 251, 255)
_DARK = (8, 48, 107)
_CELL_W = 150
_CELL_H = 40
_LEFT = 170
_TOP = 70


@dataclass(frozen=True)
class HeatmapMatrix:
    values: tuple[tuple[float, ...], ...]
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    statistic: str

    def __post_init__(self):
        if self.statistic not in STATISTICS:
            raise AnalysisError(f"unknown statistic {self.statistic!r}")
        if len(self.values) != len(self.row_labels):
            raise AnalysisError("one row label per unit row required")
        for row in self.values:
            if len(row) != len(self.col_labels):
                raise AnalysisError("one column label per group column required")

    @property
    def n_rows(self) -> int:
        return len(self.values)

    @property
    def n_cols(self) -> int:
        return len(self.col_labels)


@dataclass(frozen=True)
class AttributionRow:
    unit_index: int
    group: int
    margin: float


@dataclass(frozen=True)
class AttributionReport:
    rows: tuple[AttributionRow, ...]

    def to_json(self) -> list:
        return [{"unit": r.unit_index, "group": r.group, "margin": r.margin} for r in self.rows]


def heatmap(net: ModularNetwork, ids, dataset: Dataset, statistic: str = "mean") -> HeatmapMatrix:
    """Probe-activation intensity per (unit, group) over the evaluation ids.

    Entry (u, g) is the statistic of unit u's ungated activation across the
    ids belonging to group g. Columns follow group id order.
    """
    if statistic not in STATISTICS:
        raise AnalysisError(f"unknown statistic {statistic!r}")
    ids = tuple(ids)
    if not ids:
        raise AnalysisError("heatmap needs at least one observation id")
    groups = sorted(dataset.groups)
    per_group: dict = {g: [] for g, _ in groups}
    for obs_id in ids:
        obs = dataset.observation(obs_id)
        per_group[obs.group].append(probe_activations(net, obs))
    empty = [g for g, probes in per_group.items() if not probes]
    if empty:
        raise AnalysisError(f"groups {empty} have no observations among the evaluation ids")
    values = []
    for u in range(net.n_units):
        row = []
        for g, _ in groups:
            samples = [p[u] for p in per_group[g]]
            row.append(max(samples) if statistic == "max" else sum(samples) / len(samples))
        values.append(tuple(row))
    return HeatmapMatrix(values=tuple(values),
                         row_labels=tuple(f"unit {u}" for u in range(net.n_units)),
                         col_labels=tuple(name for _, name in groups),
                         statistic=statistic)


def attribute(matrix: HeatmapMatrix) -> AttributionReport:
    """Argmax group per unit row, ties broken toward the lowest group id.

    Margin is the gap between the top and second values of the row (0 for a
    single-column matrix).
    """
    if matrix.n_rows == 0 or matrix.n_cols == 0:
        raise AnalysisError("attribution needs a non-empty matrix")
    rows = []
    for u, row in enumerate(matrix.values):
        best = 0
        for g in range(1, len(row)):
            if row[g] > row[best]:
                best = g
        rest = [v for g, v in enumerate(row) if g != best]
        margin = row[best] - max(rest) if rest else 0.0
        rows.append(AttributionRow(unit_index=u, group=best, margin=margin))
    return AttributionReport(rows=tuple(rows))


def export_heatmap_csv(matrix: HeatmapMatrix, path) -> None:
    """CSV with header `unit,<group names...>`, values at 6 decimal places."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["unit"] + list(matrix.col_labels))
        for label, row in zip(matrix.row_labels, matrix.values):
            writer.writerow([label] + [f"{v:.6f}" for v in row])


def read_heatmap_csv(path):
    """Parse an exported heatmap back into (row_labels, col_labels, values)."""
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    col_labels = tuple(header[1:])
    row_labels = tuple(r[0] for r in rows)
    values = tuple(tuple(float(v) for v in r[1:]) for r in rows)
    return row_labels, col_labels, values


def save_attribution(report: AttributionReport, path) -> None:
    write_json(report.to_json(), path)


def _cell_color(v: float, lo: float, hi: float) -> tuple[str, float]:
    # constant matrices degenerate to the scale midpoint
    t = 0.5 if hi == lo else (v - lo) / (hi - lo)
    rgb = tuple(round(l + t * (d - l)) for l, d in zip(_LIGHT, _DARK))
    return "#%02x%02x%02x" % rgb, t


def render_heatmap_svg(matrix: HeatmapMatrix, path) -> None:
    """Standalone SVG heatmap: one rect per cell, linear light-to-dark scale,
    row/column labels, the numeric value in each cell. Byte-deterministic."""
    flat = [v for row in matrix.values for v in row]
    lo, hi = min(flat), max(flat)
    width = _LEFT + _CELL_W * matrix.n_cols + 20
    height = _TOP + _CELL_H * matrix.n_rows + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif">',
        f'<text x="{_LEFT}" y="22" font-size="14" font-weight="bold">'
        f'Unit activation heatmap ({escape(matrix.statistic)})</text>',
    ]
    for j, label in enumerate(matrix.col_labels):
        cx = _LEFT + j * _CELL_W + 8
        cy = _TOP - 10
        parts.append(f'<text x="{cx}" y="{cy}" font-size="11" '
                     f'transform="rotate(-18 {cx} {cy})">{escape(label)}</text>')
    for i, label in enumerate(matrix.row_labels):
        ty = _TOP + i * _CELL_H + _CELL_H // 2 + 4
        parts.append(f'<text x="{_LEFT - 8}" y="{ty}" font-size="12" '
                     f'text-anchor="end">{escape(label)}</text>')
    for i, row in enumerate(matrix.values):
        for j, v in enumerate(row):
            x = _LEFT + j * _CELL_W
            y = _TOP + i * _CELL_H
            fill, t = _cell_color(v, lo, hi)
            text_fill = "#ffffff" if t > 0.55 else "#1a1a1a"
            parts.append(f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" '
                         f'fill="{fill}" stroke="#ffffff" stroke-width="1"/>')
            parts.append(f'<text x="{x + _CELL_W // 2}" y="{y + _CELL_H // 2 + 4}" font-size="12" '
                         f'text-anchor="middle" fill="{text_fill}">{v:.3f}</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
