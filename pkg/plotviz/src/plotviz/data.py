"""Readers for the exported run-data files.

Everything here consumes only the documented CSV/JSON schema written by the
solver CLI: panels.json with its series manifest, series_*.csv tables,
trace.csv iteration logs, and compare.csv summaries. No dynamics or costs
are ever computed in this package.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np


class PlotDataError(Exception):
    """A required file is missing, empty, or does not parse."""


@dataclass
class Series:
    name: str
    columns: list[str]
    t: np.ndarray
    values: np.ndarray   # shape (len(t), len(columns))


@dataclass
class RunData:
    meta: dict
    series: dict[str, Series] = field(default_factory=dict)
    panels: list[dict] = field(default_factory=list)


def _read_table(path, expect_columns=None):
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise PlotDataError(f"cannot read {path}: {e}") from e
    if not rows:
        raise PlotDataError(f"empty file: {path}")
    header, body = rows[0], rows[1:]
    if not body:
        raise PlotDataError(f"no data rows in {path}")
    try:
        data = np.array([[float(v) for v in row] for row in body])
    except ValueError as e:
        raise PlotDataError(f"malformed numeric data in {path}: {e}") from e
    if data.shape[1] != len(header):
        raise PlotDataError(f"ragged rows in {path}")
    if expect_columns is not None and header != expect_columns:
        raise PlotDataError(f"unexpected columns in {path}: {header}")
    return header, data


def load_run(run_dir):
    """Load a run directory prepared by the export-plot-data verb."""
    manifest = os.path.join(run_dir, "panels.json")
    try:
        with open(manifest) as f:
            doc = json.load(f)
    except OSError as e:
        raise PlotDataError(f"missing manifest {manifest}: {e}") from e
    except json.JSONDecodeError as e:
        raise PlotDataError(f"malformed manifest {manifest}: {e}") from e
    run = RunData(meta=doc.get("run", {}), panels=doc.get("panels", []))
    for name, spec in doc.get("series", {}).items():
        path = os.path.join(run_dir, spec["file"])
        header, data = _read_table(path)
        run.series[name] = Series(name=name, columns=header[1:],
                                  t=data[:, 0], values=data[:, 1:])
    return run


def load_trace(path):
    """Read an iteration log; returns (indices, costs, wall_times)."""
    header, data = _read_table(path)
    need = {"index", "cost"}
    if not need <= set(header):
        raise PlotDataError(f"{path} lacks columns {sorted(need)}")
    idx = data[:, header.index("index")]
    cost = data[:, header.index("cost")]
    wall = (data[:, header.index("wall_time")]
            if "wall_time" in header else np.zeros_like(idx))
    return idx, cost, wall


def load_compare(compare_dir):
    """Read compare.csv plus the per-label trace files next to it.

    Returns a list of dicts with keys label, mean_iter_time, iters, costs.
    """
    path = os.path.join(compare_dir, "compare.csv")
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise PlotDataError(f"cannot read {path}: {e}") from e
    if len(rows) < 2:
        raise PlotDataError(f"no data rows in {path}")
    header = rows[0]
    for col in ("solver", "mean_iter_time"):
        if col not in header:
            raise PlotDataError(f"{path} lacks column {col}")
    entries = []
    for row in rows[1:]:
        label = row[header.index("solver")]
        trace_path = os.path.join(compare_dir, f"trace_{label}.csv")
        idx, cost, _ = load_trace(trace_path)
        entries.append({
            "label": label,
            "mean_iter_time": float(row[header.index("mean_iter_time")]),
            "iters": idx,
            "costs": cost,
        })
    return entries
