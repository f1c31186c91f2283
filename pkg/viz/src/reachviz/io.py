"""Readers for the exported CSV formats.

GridCsv: two axis columns plus a value column, one row per node,
row-major; parsing rebuilds the rectangular grid and rejects files with
missing or disordered nodes. MetricsCsv: the training time series with
its fixed header.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

GRID_HEADER = ["axis0", "axis1", "value"]
METRICS_HEADER = [
    "step", "avg_return", "violation_rate", "q_loss", "qh_loss",
    "actor_loss", "mean_lambda_feasible", "mean_lambda_infeasible",
]


@dataclass
class GridCsv:
    axis0: np.ndarray
    axis1: np.ndarray
    values: np.ndarray  # shape (len(axis0), len(axis1))

    @classmethod
    def read(cls, path) -> "GridCsv":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != GRID_HEADER:
                raise ValueError(f"{path}: expected header {GRID_HEADER}, got {header}")
            rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader]
        if not rows:
            raise ValueError(f"{path}: no grid rows")
        arr = np.asarray(rows)
        axis0 = np.unique(arr[:, 0])
        axis1 = np.unique(arr[:, 1])
        n0, n1 = len(axis0), len(axis1)
        if n0 * n1 != len(rows):
            raise ValueError(
                f"{path}: incomplete grid ({len(rows)} rows for {n0}x{n1} nodes)"
            )
        if not (np.array_equal(arr[:, 0], np.repeat(axis0, n1))
                and np.array_equal(arr[:, 1], np.tile(axis1, n0))):
            raise ValueError(f"{path}: rows are not in row-major node order")
        return cls(axis0=axis0, axis1=axis1, values=arr[:, 2].reshape(n0, n1))


@dataclass
class MetricsCsv:
    steps: np.ndarray
    columns: dict  # name -> np.ndarray

    @classmethod
    def read(cls, path) -> "MetricsCsv":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != METRICS_HEADER:
                raise ValueError(
                    f"{path}: expected header {METRICS_HEADER}, got {header}"
                )
            rows = [[float(v) for v in r] for r in reader]
        if not rows:
            raise ValueError(f"{path}: metrics file has no rows")
        arr = np.asarray(rows)
        cols = {name: arr[:, i] for i, name in enumerate(METRICS_HEADER)}
        return cls(steps=cols["step"], columns=cols)
