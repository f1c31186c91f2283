"""Offline rendering of exported run artifacts.

Pure consumer of the CSV wire formats (value grids with an
axis0,axis1,value header; metrics time series): nothing here computes
an algorithm quantity, and the package deliberately has no dependency
on the training code.
"""

__version__ = "0.1.0"

from .io import GridCsv, MetricsCsv
from .plots import plot_kernel, plot_training

__all__ = ["GridCsv", "MetricsCsv", "plot_kernel", "plot_training", "__version__"]
