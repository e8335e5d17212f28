"""Sliding-window tile plans, spatially blocked folds and augmentation plans."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

ROTATIONS = (0, 90, 180, 270)


@dataclass(frozen=True)
class TileSpec:
    row0: int
    col0: int
    size: int
    fold: int | None = None


@dataclass(frozen=True)
class Transform:
    rotation: int
    flip: bool
    row0: int
    col0: int


def _anchors(extent, tile, stride):
    out = list(range(0, extent - tile + 1, stride))
    if out[-1] + tile < extent:
        out.append(extent - tile)
    return out


def tile_plan(width, height, tile=448, stride=224):
    """Row-major tile anchors covering every cell of a ``width`` x ``height`` raster.

    Anchors sit on multiples of ``stride``; when those leave a strip
    uncovered at the right or bottom edge, one more tile is placed flush
    against that edge.
    """
    if tile > min(width, height):
        raise ValueError(f"tile {tile} larger than raster {width}x{height}")
    if tile < 1 or not 1 <= stride <= tile:
        raise ValueError(f"need 1 <= stride <= tile, got stride={stride}, tile={tile}")
    cols = _anchors(width, tile, stride)
    rows = _anchors(height, tile, stride)
    return [TileSpec(r, c, tile) for r in rows for c in cols]


def _stride_of(tiles):
    # first gap per axis; later gaps may be shortened by a flush-edge tile
    gaps = []
    for attr in ("row0", "col0"):
        a = sorted({getattr(t, attr) for t in tiles})
        if len(a) > 1:
            gaps.append(a[1] - a[0])
    return min(gaps) if gaps else None


def block_of(t, block):
    return (t.row0 // block, t.col0 // block)


def assign_folds(tiles, k=5, block=None, seed=0):
    """Assign each tile the fold of the spatial block holding its anchor.

    Blocks are ``block`` cells square. The sorted block list is shuffled with
    ``seed`` and dealt round-robin into ``k`` folds, so fold sizes differ by
    at most one block and overlapping tiles in a block share a fold.
    """
    tiles = list(tiles)
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if not tiles:
        raise ValueError("no tiles to assign")
    if block is None:
        block = tiles[0].size
    stride = _stride_of(tiles)
    if stride is not None and block < stride:
        raise ValueError(f"block {block} smaller than tile stride {stride}")
    blocks = sorted({block_of(t, block) for t in tiles})
    if len(blocks) < k:
        raise ValueError(f"only {len(blocks)} spatial blocks for {k} folds")
    order = np.random.default_rng(seed).permutation(len(blocks))
    fold_of = {blocks[j]: i % k for i, j in enumerate(order.tolist())}
    return [replace(t, fold=fold_of[block_of(t, block)]) for t in tiles]


def augment_plan(tile, n, seed, width, height, stride=224):
    """``n`` seeded right-angle rotation / flip / shift transforms for ``tile``.

    Shifts are uniform within +-stride//2 on each axis, then clamped so the
    shifted tile stays inside the ``width`` x ``height`` raster.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if tile.row0 + tile.size > height or tile.col0 + tile.size > width:
        raise ValueError("tile outside raster bounds")
    rng = np.random.default_rng(seed)
    half = stride // 2
    rot = rng.integers(0, 4, size=n)
    flip = rng.integers(0, 2, size=n)
    dr = rng.integers(-half, half + 1, size=n)
    dc = rng.integers(-half, half + 1, size=n)
    rows = np.clip(tile.row0 + dr, 0, height - tile.size)
    cols = np.clip(tile.col0 + dc, 0, width - tile.size)
    return [
        Transform(ROTATIONS[r], bool(f), int(y), int(x))
        for r, f, y, x in zip(rot.tolist(), flip.tolist(), rows.tolist(), cols.tolist())
    ]


def plan_manifest(tiles, augments=None):
    """JSON-ready manifest: one entry per tile with its transform list."""
    out = []
    for i, t in enumerate(tiles):
        entry = {"anchor": [t.row0, t.col0], "size": t.size, "fold": t.fold}
        entry["transforms"] = [asdict(a) for a in (augments[i] if augments else [])]
        out.append(entry)
    return out
