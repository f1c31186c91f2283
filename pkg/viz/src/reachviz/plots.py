"""Figure builders: feasible-set maps and training curves.

These are pure renderers of already-exported data. Multi-seed training
inputs must share their evaluation step grid; curves then get a mean
line with a 95% confidence band (1.96 standard errors across seeds).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import GridCsv, MetricsCsv


def _draw_kernel_panel(ax, grid: GridCsv, overlays: list[GridCsv], title: str):
    extent = (grid.axis1[0], grid.axis1[-1], grid.axis0[0], grid.axis0[-1])
    feasible = (grid.values <= 0.0).astype(float)
    ax.imshow(feasible, origin="lower", extent=extent, aspect="auto",
              cmap="RdYlGn", vmin=0.0, vmax=1.0, alpha=0.6)
    if grid.values.min() < 0.0 < grid.values.max():
        ax.contour(grid.axis1, grid.axis0, grid.values, levels=[0.0],
                   colors="black", linewidths=1.8)
    for i, ov in enumerate(overlays):
        if ov.values.min() < 0.5 < ov.values.max() or \
                ov.values.min() < 0.0 < ov.values.max():
            # Works for both signed fields and 0/1 membership masks.
            level = 0.5 if ov.values.min() >= 0.0 else 0.0
            ax.contour(ov.axis1, ov.axis0, ov.values, levels=[level],
                       colors=["#1f4fff"], linestyles="--", linewidths=1.4)
    ax.set_xlabel("axis1")
    ax.set_ylabel("axis0")
    ax.set_title(title)


def plot_kernel(grid_paths, out_path, overlay_paths=(), titles=None):
    """Filled sub-zero maps with zero-level lines, one panel per grid.

    Overlays are drawn on every panel as dashed contours (signed fields
    at level 0, membership masks at level 0.5).
    """
    grids = [GridCsv.read(p) for p in grid_paths]
    overlays = [GridCsv.read(p) for p in overlay_paths]
    if not grids:
        raise ValueError("need at least one grid CSV")
    titles = titles or [str(p) for p in grid_paths]
    fig, axes = plt.subplots(1, len(grids), figsize=(5.2 * len(grids), 4.6),
                             squeeze=False)
    for ax, grid, title in zip(axes[0], grids, titles):
        _draw_kernel_panel(ax, grid, overlays, title)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def _band(ax, steps, series, label, color):
    series = np.asarray(series)
    mean = series.mean(axis=0)
    ax.plot(steps, mean, color=color, label=label)
    if series.shape[0] > 1:
        stderr = series.std(axis=0, ddof=1) / np.sqrt(series.shape[0])
        ax.fill_between(steps, mean - 1.96 * stderr, mean + 1.96 * stderr,
                        color=color, alpha=0.25, linewidth=0)


def plot_training(metrics_paths, out_path, label=None):
    """Return and violation-rate curves; multiple seeds get a 95% CI band."""
    runs = [MetricsCsv.read(p) for p in metrics_paths]
    if not runs:
        raise ValueError("need at least one metrics CSV")
    steps = runs[0].steps
    for run in runs[1:]:
        if not np.array_equal(run.steps, steps):
            raise ValueError("metrics files have mismatched step grids")
    fig, (ax_ret, ax_vio) = plt.subplots(1, 2, figsize=(10.4, 4.2))
    name = label or "run"
    _band(ax_ret, steps, [r.columns["avg_return"] for r in runs], name, "#2066a8")
    ax_ret.set_xlabel("environment steps")
    ax_ret.set_ylabel("average return")
    ax_ret.legend()
    _band(ax_vio, steps, [r.columns["violation_rate"] for r in runs], name, "#c2402a")
    ax_vio.set_xlabel("environment steps")
    ax_vio.set_ylabel("violation rate")
    ax_vio.set_ylim(bottom=-0.02)
    ax_vio.legend()
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
