"""Regular rectangular grids of scalar values.

A GridSpec describes node locations (linspace per axis, endpoints
included); a ValueGrid couples a spec with a value array. Multilinear
interpolation is exposed through `locate`, which precomputes corner
indices and weights so that value-iteration sweeps can reuse them.

Export formats:
  * CSV with header ``axis0,axis1,value``, one row per node, row-major
    (axis0 slowest). The reader rejects incomplete grids.
  * A binary blob with a 16-byte magic+dims header, followed by the
    axis bounds and the float64 values.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass
from itertools import product

import numpy as np

GRID_MAGIC = b"RLGRID01"


@dataclass(frozen=True)
class GridSpec:
    lows: tuple[float, ...]
    highs: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lows) == len(self.highs) == len(self.counts)):
            raise ValueError("lows, highs, counts must share a length")
        if any(n < 2 for n in self.counts):
            raise ValueError("need at least 2 nodes per axis")
        if any(lo >= hi for lo, hi in zip(self.lows, self.highs)):
            raise ValueError("each low must be below its high")

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.counts))

    @property
    def steps(self) -> np.ndarray:
        return (np.asarray(self.highs) - np.asarray(self.lows)) / (
            np.asarray(self.counts) - 1
        )

    def axes(self) -> list[np.ndarray]:
        return [
            np.linspace(lo, hi, n)
            for lo, hi, n in zip(self.lows, self.highs, self.counts)
        ]

    def points(self) -> np.ndarray:
        """All node coordinates, shape (n_nodes, ndim), row-major."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])


def locate(spec: GridSpec, P: np.ndarray):
    """Corner indices and weights for multilinear interpolation.

    Returns (idx, w, inside): idx is (n, 2^d) flat int32 indices into
    the row-major value array, w the matching weights, inside a bool
    mask of points lying within the grid's bounding box. Indices for
    outside points are clipped and safe to gather; their interpolated
    value is meaningless and must be replaced by the caller.
    """
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    d = spec.ndim
    if P.shape[1] != d:
        raise ValueError(f"points have dim {P.shape[1]}, grid has {d}")
    lows = np.asarray(spec.lows)
    highs = np.asarray(spec.highs)
    counts = np.asarray(spec.counts)
    steps = spec.steps

    t = (P - lows) / steps
    base = np.floor(t).astype(np.int64)
    np.clip(base, 0, counts - 2, out=base)
    frac = t - base
    np.clip(frac, 0.0, 1.0, out=frac)
    inside = np.all((P >= lows) & (P <= highs), axis=1)

    strides = np.ones(d, dtype=np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * counts[i + 1]
    flat_base = base @ strides

    n_corners = 1 << d
    idx = np.empty((P.shape[0], n_corners), dtype=np.int64)
    w = np.empty((P.shape[0], n_corners), dtype=np.float64)
    for c, offs in enumerate(product((0, 1), repeat=d)):
        offset = sum(o * strides[i] for i, o in enumerate(offs))
        idx[:, c] = flat_base + offset
        wc = np.ones(P.shape[0])
        for i, o in enumerate(offs):
            wc = wc * (frac[:, i] if o else 1.0 - frac[:, i])
        w[:, c] = wc
    return idx, w, inside


def interpolate(values: np.ndarray, spec: GridSpec, P: np.ndarray):
    """Multilinear interpolation of `values` at points P.

    Returns (vals, inside); entries of vals where ~inside are clamped-
    edge extrapolations and should be treated per the caller's policy.
    """
    idx, w, inside = locate(spec, P)
    flat = np.asarray(values, dtype=np.float64).ravel()
    vals = np.einsum("nc,nc->n", flat[idx], w)
    return vals, inside


@dataclass
class ValueGrid:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != tuple(self.spec.counts):
            raise ValueError(
                f"values shape {self.values.shape} != grid counts {self.spec.counts}"
            )

    def sample(self, P: np.ndarray):
        return interpolate(self.values, self.spec, P)

    def feasible_mask(self) -> np.ndarray:
        """Boolean mask of the sub-zero level set."""
        return self.values <= 0.0

    def to_csv(self, path) -> None:
        if self.spec.ndim != 2:
            raise ValueError("CSV export is defined for 2-D grids")
        pts = self.spec.points()
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["axis0", "axis1", "value"])
            for (a0, a1), v in zip(pts, self.values.ravel()):
                writer.writerow([f"{a0:.12g}", f"{a1:.12g}", f"{v:.12g}"])

    @classmethod
    def from_csv(cls, path) -> "ValueGrid":
        with open(path, newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != ["axis0", "axis1", "value"]:
                raise ValueError(f"unexpected grid CSV header: {header}")
            rows = [(float(r[0]), float(r[1]), float(r[2])) for r in reader]
        if not rows:
            raise ValueError("empty grid CSV")
        arr = np.asarray(rows)
        ax0 = np.unique(arr[:, 0])
        ax1 = np.unique(arr[:, 1])
        n0, n1 = len(ax0), len(ax1)
        if n0 * n1 != len(rows):
            raise ValueError(
                f"grid CSV is not a complete rectangular grid: "
                f"{len(rows)} rows for {n0}x{n1} nodes"
            )
        expect0 = np.repeat(ax0, n1)
        expect1 = np.tile(ax1, n0)
        if not (np.array_equal(arr[:, 0], expect0) and np.array_equal(arr[:, 1], expect1)):
            raise ValueError("grid CSV rows are not in row-major node order")
        spec = GridSpec(
            lows=(float(ax0[0]), float(ax1[0])),
            highs=(float(ax0[-1]), float(ax1[-1])),
            counts=(n0, n1),
        )
        return cls(spec=spec, values=arr[:, 2].reshape(n0, n1))

    def to_binary(self, path) -> None:
        if self.spec.ndim != 2:
            raise ValueError("binary export is defined for 2-D grids")
        with open(path, "wb") as f:
            f.write(GRID_MAGIC)
            f.write(struct.pack("<II", *self.spec.counts))
            f.write(struct.pack(
                "<4d",
                self.spec.lows[0], self.spec.highs[0],
                self.spec.lows[1], self.spec.highs[1],
            ))
            f.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def from_binary(cls, path) -> "ValueGrid":
        with open(path, "rb") as f:
            blob = f.read()
        if blob[:8] != GRID_MAGIC:
            raise ValueError("bad grid magic")
        n0, n1 = struct.unpack_from("<II", blob, 8)
        lo0, hi0, lo1, hi1 = struct.unpack_from("<4d", blob, 16)
        values = np.frombuffer(blob, dtype="<f8", count=n0 * n1, offset=48)
        spec = GridSpec(lows=(lo0, lo1), highs=(hi0, hi1), counts=(n0, n1))
        return cls(spec=spec, values=values.reshape(n0, n1).copy())


def mask_to_grid(spec: GridSpec, mask: np.ndarray) -> ValueGrid:
    """Encode a boolean feasibility mask as a 0/1 valued grid (1 = feasible)."""
    return ValueGrid(spec=spec, values=mask.astype(np.float64))


def grid_csv_string(grid: ValueGrid) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["axis0", "axis1", "value"])
    for (a0, a1), v in zip(grid.spec.points(), grid.values.ravel()):
        writer.writerow([f"{a0:.12g}", f"{a1:.12g}", f"{v:.12g}"])
    return buf.getvalue()
