import numpy as np
import pytest
from scipy import stats as sps

from coraltk.tiling import ROTATIONS, TileSpec, assign_folds, augment_plan, block_of, tile_plan


def enumerate_anchors(extent, tile, stride):
    """Independent oracle: walk k*stride until the window would overrun."""
    out, k = [], 0
    while k * stride + tile <= extent:
        out.append(k * stride)
        k += 1
    if out[-1] + tile < extent:
        out.append(extent - tile)
    return out


def coverage(tiles, width, height):
    cov = np.zeros((height, width), dtype=np.int32)
    for t in tiles:
        assert 0 <= t.row0 and t.row0 + t.size <= height
        assert 0 <= t.col0 and t.col0 + t.size <= width
        cov[t.row0:t.row0 + t.size, t.col0:t.col0 + t.size] += 1
    return cov


def test_two_row_three_column_example():
    tiles = tile_plan(896, 672)
    assert sorted({t.col0 for t in tiles}) == [0, 224, 448]
    assert sorted({t.row0 for t in tiles}) == [0, 224]
    assert len(tiles) == 6
    assert [(t.row0, t.col0) for t in tiles] == [(r, c) for r in (0, 224) for c in (0, 224, 448)]


def test_flush_edge_rule():
    tiles = tile_plan(1000, 448)
    assert [t.col0 for t in tiles] == [0, 224, 448, 552] == enumerate_anchors(1000, 448, 224)


def test_single_tile():
    assert tile_plan(448, 448) == [TileSpec(0, 0, 448)]


def test_tile_larger_than_raster():
    with pytest.raises(ValueError):
        tile_plan(300, 500)
    with pytest.raises(ValueError):
        tile_plan(500, 500, tile=100, stride=0)
    with pytest.raises(ValueError):
        tile_plan(500, 500, tile=100, stride=101)


def test_random_coverage(rng):
    for _ in range(50):
        tile = int(rng.integers(8, 40))
        stride = int(rng.integers(1, tile + 1))
        w, h = (int(v) for v in rng.integers(tile, 200, size=2))
        tiles = tile_plan(w, h, tile, stride)
        assert (coverage(tiles, w, h) >= 1).all()
        assert [t.col0 for t in tiles[:len(set(t.col0 for t in tiles))]] == enumerate_anchors(w, tile, stride)


def test_folds_even_blocks():
    tiles = tile_plan(5 * 100, 2 * 100, tile=100, stride=100)
    out = assign_folds(tiles, k=5, block=100, seed=3)
    sizes = np.bincount([t.fold for t in out], minlength=5)
    assert sizes.tolist() == [2, 2, 2, 2, 2]


def test_folds_deterministic_and_seed_dependent():
    tiles = tile_plan(2000, 1500)
    a = assign_folds(tiles, 5, 448, seed=11)
    assert a == assign_folds(tiles, 5, 448, seed=11)
    assert [t.fold for t in a] != [t.fold for t in assign_folds(tiles, 5, 448, seed=12)]


def test_no_block_straddles_folds(rng):
    for seed in range(20):
        w, h = (int(v) for v in rng.integers(900, 3000, size=2))
        tiles = tile_plan(w, h)
        block = int(rng.choice([224, 448, 896]))
        out = assign_folds(tiles, 5, block, seed) if len({block_of(t, block) for t in tiles}) >= 5 else None
        if out is None:
            continue
        folds_per_block = {}
        for t in out:
            folds_per_block.setdefault(block_of(t, block), set()).add(t.fold)
        assert all(len(f) == 1 for f in folds_per_block.values())
        sizes = np.bincount([f.pop() for f in folds_per_block.values()], minlength=5)
        assert sizes.max() - sizes.min() <= 1


def test_fold_errors():
    tiles = tile_plan(448, 448)
    with pytest.raises(ValueError, match="blocks"):
        assign_folds(tiles, 5, 448)
    with pytest.raises(ValueError):
        assign_folds(tiles, 1, 448)
    with pytest.raises(ValueError, match="stride"):
        assign_folds(tile_plan(2000, 2000), 5, 100)


def test_augment_empty_and_bounds(rng):
    t = TileSpec(0, 552, 448)
    assert augment_plan(t, 0, 1, 1000, 1000) == []
    plan = augment_plan(t, 500, 1, 1000, 1000)
    for a in plan:
        assert a.rotation in ROTATIONS
        assert 0 <= a.row0 <= 1000 - 448 and 0 <= a.col0 <= 1000 - 448
        assert abs(a.col0 - t.col0) <= 112
    assert augment_plan(t, 50, 99, 1000, 1000) == augment_plan(t, 50, 99, 1000, 1000)
    with pytest.raises(ValueError):
        augment_plan(t, -1, 1, 1000, 1000)


def test_augment_rotation_uniform():
    plan = augment_plan(TileSpec(224, 224, 448), 10_000, 2024, 1000, 1000)
    counts = np.bincount([ROTATIONS.index(a.rotation) for a in plan], minlength=4)
    assert sps.chisquare(counts).pvalue > 0.001
    flips = sum(a.flip for a in plan)
    assert 4700 < flips < 5300
