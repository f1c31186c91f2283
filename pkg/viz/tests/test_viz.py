"""Rendering smoke tests on synthetic fixtures.

The package must stay a pure renderer: no dependency on the training
code, figures produced from CSV fixtures alone.
"""

import csv

import numpy as np
import pytest

from reachviz.cli import main
from reachviz.io import GRID_HEADER, METRICS_HEADER, GridCsv, MetricsCsv
from reachviz.plots import plot_kernel, plot_training


def write_grid(path, fn, n0=41, n1=41, lo=-5.0, hi=5.0):
    ax0 = np.linspace(lo, hi, n0)
    ax1 = np.linspace(lo, hi, n1)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(GRID_HEADER)
        for a in ax0:
            for b in ax1:
                w.writerow([f"{a:.12g}", f"{b:.12g}", f"{fn(a, b):.12g}"])
    return path


def write_metrics(path, seed, n_rows=8):
    rng = np.random.default_rng(seed)
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRICS_HEADER)
        for i in range(n_rows):
            step = (i + 1) * 1000
            w.writerow([step, -500 + 40 * i + rng.normal(0, 10),
                        max(0.0, 0.2 - 0.03 * i + rng.normal(0, 0.01)),
                        10.0 / (i + 1), 0.01, 5.0, 0.3, 3.0])
    return path


def braking_field(a, b):
    # A kernel-shaped signed field: negative inside a parabola-bounded set.
    inside = (abs(a) <= 5 and abs(b) <= 5
              and (b <= 0 or a + b * b <= 5) and (b >= 0 or -a + b * b <= 5))
    return -1.0 if inside else 1.0


class TestKernelFigure:
    def test_kernel_with_overlay(self, tmp_path):
        grid = write_grid(tmp_path / "kernel.csv", braking_field)
        overlay = write_grid(tmp_path / "analytic.csv",
                             lambda a, b: float(braking_field(a, b) < 0))
        out = tmp_path / "kernel.png"
        assert main(["kernel", "--grid", str(grid), "--overlay", str(overlay),
                     "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 1000

    def test_constant_negative_grid_all_feasible(self, tmp_path):
        grid = write_grid(tmp_path / "flat.csv", lambda a, b: -2.0)
        out = tmp_path / "flat.svg"
        assert main(["kernel", "--grid", str(grid), "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 0

    def test_slice_triplet_three_panels(self, tmp_path):
        paths = [
            write_grid(tmp_path / f"slice_{i}.csv",
                       lambda a, b, i=i: a * a + b * b - (2.0 + i))
            for i in range(3)
        ]
        out = tmp_path / "triplet.png"
        fig_path = plot_kernel(paths, out, titles=["zd=-1", "zd=0", "zd=+1"])
        assert fig_path == out and out.exists() and out.stat().st_size > 1000

    def test_malformed_grid_fails(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b,c\n1,2,3\n")
        assert main(["kernel", "--grid", str(bad),
                     "--out", str(tmp_path / "x.png")]) == 1

    def test_incomplete_grid_fails(self, tmp_path):
        grid = write_grid(tmp_path / "g.csv", lambda a, b: a, n0=5, n1=5)
        lines = grid.read_text().splitlines()
        grid.write_text("\n".join(lines[:-1]) + "\n")
        with pytest.raises(ValueError, match="incomplete"):
            GridCsv.read(grid)


class TestTrainingFigure:
    def test_single_run_plain_curves(self, tmp_path):
        m = write_metrics(tmp_path / "m0.csv", seed=0)
        out = tmp_path / "train.png"
        assert main(["training", "--metrics", str(m), "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 1000

    def test_five_seeds_confidence_band(self, tmp_path):
        paths = [str(write_metrics(tmp_path / f"m{i}.csv", seed=i))
                 for i in range(5)]
        out = tmp_path / "train5.png"
        assert main(["training", "--metrics", *paths, "--out", str(out)]) == 0
        assert out.exists() and out.stat().st_size > 1000

    def test_empty_metrics_fails(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text(",".join(METRICS_HEADER) + "\n")
        assert main(["training", "--metrics", str(empty),
                     "--out", str(tmp_path / "x.png")]) == 1

    def test_header_mismatch_fails(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("step,reward\n1,2\n")
        assert main(["training", "--metrics", str(bad),
                     "--out", str(tmp_path / "x.png")]) == 1

    def test_mismatched_step_grids_rejected(self, tmp_path):
        a = write_metrics(tmp_path / "a.csv", seed=0, n_rows=5)
        b = write_metrics(tmp_path / "b.csv", seed=1, n_rows=7)
        with pytest.raises(ValueError, match="mismatched"):
            plot_training([a, b], tmp_path / "x.png")


def test_renderer_is_independent_of_training_code():
    import sys

    import reachviz, reachviz.cli, reachviz.io, reachviz.plots  # noqa: F401

    assert not any(mod == "reachrl" or mod.startswith("reachrl.")
                   for mod in sys.modules)
