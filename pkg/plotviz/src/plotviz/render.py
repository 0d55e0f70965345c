"""Figure regeneration from simulation CSV artifacts.

Reads the CSV files emitted by the simulation CLI (every file starts with
a ``# digest=<hash>`` line) and renders the three figure styles:

  braid   fidelity of the four levels against the sweep angle, the angle
          recovered from time by a linear map onto [0, pi/2];
  sweep   final fidelity against the error magnitude, one series per
          phase-slope value;
  chiral  fidelity of the four levels against time across the loop stages.

Rendering is read-only and deterministic: fixed figure geometry, fixed
style cycle, and the source digest embedded in the image metadata.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

KINDS = ("braid", "sweep", "chiral")

_SERIES_LABELS = {
    "F_gamma11": r"$\gamma_{1,1}$",
    "F_gamma12": r"$\gamma_{1,2}$",
    "F_gamma13": r"$\gamma_{1,3}$",
    "F_e": r"$e$",
}
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


class SchemaError(ValueError):
    """CSV does not match the schema the figure kind expects."""


@dataclass(frozen=True)
class PlotSpec:
    """One figure job: source CSV, figure kind, output image."""

    input_csv: Path
    kind: str
    output: Path
    xlabel: str | None = None
    ylabel: str = "fidelity"
    styles: dict = field(default_factory=dict)
    dpi: int = 160

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}")


@dataclass(frozen=True)
class Table:
    digest: str
    columns: list[str]
    data: np.ndarray        # (n_rows, n_cols); may be empty


def read_artifact_csv(path) -> Table:
    """Parse a digest-stamped CSV artifact."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().strip()
        if not first.startswith("# digest="):
            raise SchemaError(f"{path} is missing the digest header line")
        digest = first.split("=", 1)[1]
        reader = csv.reader(fh)
        try:
            columns = [c.strip() for c in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} has no column header")
        rows = []
        for row in reader:
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise SchemaError(f"{path}: non-numeric payload row {row}") from exc
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(columns)))
    if rows and data.shape[1] != len(columns):
        raise SchemaError(f"{path}: ragged rows")
    return Table(digest=digest, columns=columns, data=data)


def _require_columns(table: Table, needed: list[str], kind: str):
    missing = [c for c in needed if c not in table.columns]
    if missing:
        raise SchemaError(f"columns {missing} required for kind {kind!r} "
                          f"not found in {table.columns}")


def _new_axes(spec: PlotSpec):
    fig, ax = plt.subplots(figsize=(5.4, 3.6), constrained_layout=True)
    ax.set_ylabel(spec.ylabel)
    ax.grid(True, alpha=0.3, linewidth=0.5)
    return fig, ax


def _style(spec: PlotSpec, label: str, i: int) -> dict:
    base = {"color": _COLORS[i % len(_COLORS)], "linewidth": 1.4}
    base.update(spec.styles.get(label, {}))
    return base


def _plot_trajectory(ax, spec: PlotSpec, table: Table, x, xlabel):
    series = [c for c in table.columns if c.startswith("F_")]
    for i, col in enumerate(series):
        j = table.columns.index(col)
        y = table.data[:, j] if len(table.data) else []
        ax.plot(x, y, label=_SERIES_LABELS.get(col, col), **_style(spec, col, i))
    ax.set_xlabel(spec.xlabel or xlabel)
    ax.set_ylim(-0.02, 1.02)
    if series:
        ax.legend(loc="center right", fontsize=8)


def render(spec: PlotSpec) -> Path:
    """Render the figure; returns the written image path.

    The source digest lands in the PNG metadata (``Description``), so an
    image can always be traced back to the exact run that produced its
    data.  An empty payload (header only) yields valid empty axes.
    """
    table = read_artifact_csv(spec.input_csv)
    if spec.kind in ("braid", "chiral"):
        _require_columns(table, ["t", "F_gamma11", "F_gamma12", "F_e"], spec.kind)
        t = table.data[:, table.columns.index("t")] if len(table.data) else np.array([])
        fig, ax = _new_axes(spec)
        if spec.kind == "braid":
            # sweep angle from time: linear ramp onto [0, pi/2]
            if len(t) and t[-1] > t[0]:
                x = (t - t[0]) / (t[-1] - t[0]) * (np.pi / 2)
            else:
                x = t
            _plot_trajectory(ax, spec, table, x, r"$\theta$ (rad)")
            if len(t):
                ax.set_xticks([0, np.pi / 8, np.pi / 4, 3 * np.pi / 8, np.pi / 2])
                ax.set_xticklabels(["0", r"$\pi/8$", r"$\pi/4$", r"$3\pi/8$",
                                    r"$\pi/2$"])
        else:
            _plot_trajectory(ax, spec, table, t, "t")
    elif spec.kind == "sweep":
        _require_columns(table, ["epsilon", "lambda", "fidelity"], spec.kind)
        fig, ax = _new_axes(spec)
        if len(table.data):
            eps = table.data[:, table.columns.index("epsilon")]
            lam = table.data[:, table.columns.index("lambda")]
            fid = table.data[:, table.columns.index("fidelity")]
            for i, lval in enumerate(np.unique(lam)):
                sel = lam == lval
                order = np.argsort(eps[sel])
                label = f"$\\lambda={lval:g}$"
                ax.plot(eps[sel][order], fid[sel][order], marker="o",
                        markersize=2.5, label=label, **_style(spec, label, i))
            ax.legend(loc="lower left", fontsize=8)
        ax.set_xlabel(spec.xlabel or r"$\epsilon$")
    meta = {"Software": "plotviz", "Description": f"digest={table.digest}"}
    out = Path(spec.output)
    fig.savefig(out, dpi=spec.dpi, metadata=meta)
    plt.close(fig)
    return out
