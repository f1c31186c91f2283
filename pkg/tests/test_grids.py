import numpy as np
import pytest

from reachrl.grids import GridSpec, ValueGrid, interpolate, locate


def test_spec_validation():
    with pytest.raises(ValueError):
        GridSpec(lows=(0,), highs=(1,), counts=(1,))
    with pytest.raises(ValueError):
        GridSpec(lows=(1, 0), highs=(0, 1), counts=(5, 5))
    with pytest.raises(ValueError):
        GridSpec(lows=(0,), highs=(1, 2), counts=(5, 5))


def test_points_row_major():
    g = GridSpec(lows=(0, 0), highs=(1, 2), counts=(2, 3))
    pts = g.points()
    expected = np.array(
        [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]], dtype=float
    )
    assert np.allclose(pts, expected)


def test_interpolation_reproduces_affine_functions():
    # Bilinear interpolation is exact for f(x, y) = 2x + 3y - 1.
    g = GridSpec(lows=(-2, 0), highs=(3, 4), counts=(11, 9))
    pts = g.points()
    values = (2 * pts[:, 0] + 3 * pts[:, 1] - 1).reshape(g.counts)
    rng = np.random.default_rng(0)
    Q = rng.uniform([-2, 0], [3, 4], size=(500, 2))
    vals, inside = interpolate(values, g, Q)
    assert inside.all()
    assert np.allclose(vals, 2 * Q[:, 0] + 3 * Q[:, 1] - 1, atol=1e-12)


def test_interpolation_exact_at_nodes():
    g = GridSpec(lows=(0, 0), highs=(1, 1), counts=(4, 5))
    rng = np.random.default_rng(1)
    values = rng.normal(size=g.counts)
    vals, inside = interpolate(values, g, g.points())
    assert inside.all()
    assert np.allclose(vals, values.ravel(), atol=1e-14)


def test_locate_flags_outside_points():
    g = GridSpec(lows=(0, 0), highs=(1, 1), counts=(3, 3))
    _, _, inside = locate(g, np.array([[0.5, 0.5], [1.5, 0.5], [0.5, -0.1], [1.0, 1.0]]))
    assert inside.tolist() == [True, False, False, True]


def test_csv_round_trip(tmp_path):
    g = GridSpec(lows=(-1, 2), highs=(1, 3), counts=(5, 4))
    rng = np.random.default_rng(2)
    grid = ValueGrid(spec=g, values=rng.normal(size=g.counts))
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    back = ValueGrid.from_csv(path)
    assert back.spec == g
    assert np.allclose(back.values, grid.values, atol=1e-10)


def test_csv_rejects_missing_cells(tmp_path):
    g = GridSpec(lows=(0, 0), highs=(1, 1), counts=(3, 3))
    grid = ValueGrid(spec=g, values=np.zeros(g.counts))
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:-1]) + "\n")  # drop one node
    with pytest.raises(ValueError, match="complete rectangular"):
        ValueGrid.from_csv(path)


def test_csv_rejects_wrong_header(tmp_path):
    path = tmp_path / "grid.csv"
    path.write_text("a,b,c\n0,0,1\n")
    with pytest.raises(ValueError, match="header"):
        ValueGrid.from_csv(path)


def test_binary_round_trip(tmp_path):
    g = GridSpec(lows=(-5, -5), highs=(5, 5), counts=(7, 9))
    rng = np.random.default_rng(3)
    grid = ValueGrid(spec=g, values=rng.normal(size=g.counts))
    path = tmp_path / "grid.bin"
    grid.to_binary(path)
    back = ValueGrid.from_binary(path)
    assert back.spec == g
    assert np.array_equal(back.values, grid.values)


def test_binary_rejects_bad_magic(tmp_path):
    path = tmp_path / "grid.bin"
    path.write_bytes(b"NOTAGRID" + b"\x00" * 64)
    with pytest.raises(ValueError, match="magic"):
        ValueGrid.from_binary(path)


def test_value_shape_mismatch_rejected():
    g = GridSpec(lows=(0, 0), highs=(1, 1), counts=(3, 3))
    with pytest.raises(ValueError):
        ValueGrid(spec=g, values=np.zeros((2, 3)))
