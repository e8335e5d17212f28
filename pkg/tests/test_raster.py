import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coraltk.raster import (
    ClassMask, GeoTransform, Grid, GridFormatError, check_aligned, read_ascii_grid, read_ascii_mask,
    write_ascii_grid, write_ascii_mask,
)

from conftest import grid, mask

SMALL = """ncols 2
nrows 2
xllcorner 100.5
yllcorner 200.25
cellsize 0.001
NODATA_value -9999
1 2
3 4
"""


def test_read_small_grid():
    g = read_ascii_grid(SMALL)
    assert (g.width, g.height) == (2, 2)
    assert g.values.tolist() == [[1, 2], [3, 4]]
    assert g.transform == GeoTransform(100.5, 200.25, 0.001)
    assert g.nodata == -9999


def test_nodata_token_passthrough():
    g = read_ascii_grid(SMALL.replace("3 4", "-9999 4"))
    assert g.values[1, 0] == g.nodata
    assert not g.valid[1, 0]


def test_header_order_and_case_insensitive():
    text = "CELLSIZE 0.001\nnodata_value -9999\nNROWS 2\nxllcorner 100.5\nNcols 2\nYLLCORNER 200.25\n1 2\n3 4\n"
    assert read_ascii_grid(text) == read_ascii_grid(SMALL)


@pytest.mark.parametrize(
    "text, line, col",
    [
        (SMALL.replace("3 4", "3"), None, None),
        (SMALL.replace("3 4", "3 x4"), 8, 2),
        (SMALL.replace("cellsize 0.001", "cellsize 0"), 5, 2),
        (SMALL.replace("cellsize 0.001", "cellsize -1"), 5, 2),
        (SMALL.replace("xllcorner", "xllcentre"), 3, 1),
        (SMALL.replace("ncols 2", "ncols two"), 1, 2),
    ],
)
def test_malformed_inputs(text, line, col):
    with pytest.raises(GridFormatError) as e:
        read_ascii_grid(text)
    if line is not None:
        assert e.value.line == line
        assert e.value.col == col


def test_wrong_cell_count_message():
    with pytest.raises(GridFormatError, match="wrong cell count"):
        read_ascii_grid(SMALL.replace("3 4", "3"))


def test_round_trip_small():
    g = read_ascii_grid(SMALL)
    assert read_ascii_grid(write_ascii_grid(g)) == g


def test_all_nodata_written_as_token():
    g = grid(np.full((3, 4), -9999.0))
    text = write_ascii_grid(g)
    body = text.splitlines()[6:]
    assert all(tok == "-9999" for line in body for tok in line.split())
    assert read_ascii_grid(text) == g


def test_random_64_round_trip(rng):
    v = rng.normal(scale=1e3, size=(64, 64))
    v[rng.random((64, 64)) < 0.1] = -3.5e38
    g = Grid(v, GeoTransform(rng.uniform(-1e6, 1e6), rng.uniform(-1e6, 1e6), 0.001), -3.5e38)
    back = read_ascii_grid(write_ascii_grid(g))
    assert back == g
    assert back.values.tobytes() == g.values.tobytes()


finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 6), st.integers(1, 6), st.data(),
    finite, finite, st.floats(1e-6, 1e3),
)
def test_round_trip_property(h, w, data, ox, oy, cs):
    vals = data.draw(st.lists(finite.filter(lambda v: v != -9999.0), min_size=h * w, max_size=h * w))
    g = Grid(np.array(vals).reshape(h, w), GeoTransform(ox, oy, cs))
    assert read_ascii_grid(write_ascii_grid(g)) == g


def test_mask_round_trip(rng):
    ids = rng.choice([0, 1, 2, 255], size=(9, 7))
    m = mask(ids)
    back = read_ascii_mask(write_ascii_mask(m))
    assert back == m
    assert "NODATA_value 255" in write_ascii_mask(m)


def test_mask_rejects_unknown_ids():
    with pytest.raises(ValueError):
        ClassMask(np.array([[0, 3]]), GeoTransform(0, 0, 1))


def test_alignment():
    a = grid(np.zeros((4, 5)), cell=0.001)
    assert check_aligned(a, a)
    assert not check_aligned(a, grid(np.zeros((4, 5)), cell=0.002))
    assert check_aligned(a, grid(np.zeros((4, 5)), cell=0.001, origin=(1e-12, 0.0)))
    assert not check_aligned(a, grid(np.zeros((5, 4)), cell=0.001))
    assert check_aligned(a, mask(np.zeros((4, 5), int), cell=0.001))


def test_grid_is_immutable():
    g = grid([[1.0, 2.0]])
    with pytest.raises(ValueError):
        g.values[0, 0] = 5
    src = np.array([[1.0, 2.0]])
    g2 = grid(src)
    src[0, 0] = 7
    assert g2.values[0, 0] == 1.0


def test_grid_rejects_nonfinite_and_bad_cellsize():
    with pytest.raises(ValueError):
        grid([[np.nan]])
    with pytest.raises(ValueError):
        GeoTransform(0, 0, 0)
    with pytest.raises(ValueError):
        grid([[1.5]], units="dimensionless")
