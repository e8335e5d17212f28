"""Slope, aspect and multiscale Vector Ruggedness Measure (VRM).

VRM for a window is ``1 - |sum of unit normals| / N`` over the N valid cells
in the window: 0 for a plane (however steep), approaching 1 when normals
point every which way.

Two window kernels are provided. ``naive`` adds every window offset
explicitly (O(window**2) per cell). ``sat`` builds summed-area tables of the
normal components and the valid-cell count, so each window costs four
lookups regardless of size. ``naive`` is the reference for ``sat``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Grid, require_aligned

ASPECT_FLAT = -1.0
DEFAULT_WINDOWS = (5, 7, 11, 21, 31, 51, 71, 101, 131)
KERNELS = ("naive", "sat")


class WindowError(ValueError):
    """Window parameter invalid for the grid; ``window`` names the culprit."""

    def __init__(self, msg, window=None):
        self.window = window
        super().__init__(msg if window is None else f"window {window}: {msg}")


@dataclass(frozen=True)
class VrmParams:
    window: int = 3
    min_valid_fraction: float = 0.5

    def __post_init__(self):
        if int(self.window) != self.window or self.window < 3 or self.window % 2 == 0:
            raise WindowError("window must be an odd integer >= 3", self.window)
        if not 0 < self.min_valid_fraction <= 1:
            raise ValueError(f"min_valid_fraction must be in (0, 1], got {self.min_valid_fraction}")


@dataclass(frozen=True, eq=False)
class NormalField:
    nx: np.ndarray
    ny: np.ndarray
    nz: np.ndarray
    valid: np.ndarray
    transform: object

    @property
    def shape(self):
        return self.valid.shape


def derived_nodata(nodata):
    """The dsm sentinel, unless it could collide with a slope/aspect/VRM value."""
    return nodata if (nodata < -1 or nodata > 7) else -9999.0


def slope_aspect(dsm):
    """Horn 3x3 slope and aspect, both in radians.

    Aspect is the downslope direction, clockwise from grid north, in
    [0, 2*pi). Cells with zero gradient get slope 0 and aspect
    ``ASPECT_FLAT`` (-1). Border cells and cells whose 3x3 neighbourhood
    touches nodata are nodata in both outputs.
    """
    if dsm.units != "meters":
        raise ValueError(f"dsm must be in meters, got {dsm.units}")
    h, w = dsm.values.shape
    if h < 3 or w < 3:
        raise ValueError(f"slope/aspect needs at least a 3x3 grid, got {w}x{h}")
    z = dsm.values
    valid = dsm.valid
    cs = dsm.transform.cell_size

    # a b c / d e f / g h i around each interior cell; row 0 is north
    a, b, c = z[:-2, :-2], z[:-2, 1:-1], z[:-2, 2:]
    d, f = z[1:-1, :-2], z[1:-1, 2:]
    g, hh, i = z[2:, :-2], z[2:, 1:-1], z[2:, 2:]
    dz_east = ((c + 2 * f + i) - (a + 2 * d + g)) / (8 * cs)
    dz_north = ((a + 2 * b + c) - (g + 2 * hh + i)) / (8 * cs)

    ok = np.ones((h - 2, w - 2), dtype=bool)
    for dr in range(3):
        for dc in range(3):
            ok &= valid[dr:dr + h - 2, dc:dc + w - 2]

    grad = np.hypot(dz_east, dz_north)
    slope_in = np.arctan(grad)
    aspect_in = np.mod(np.arctan2(-dz_east, -dz_north), 2 * np.pi)
    # mod can round a tiny negative angle up to exactly 2*pi
    aspect_in[aspect_in >= 2 * np.pi] = 0.0
    aspect_in[grad == 0] = ASPECT_FLAT

    nd = derived_nodata(dsm.nodata)
    slope = np.full((h, w), nd)
    aspect = np.full((h, w), nd)
    slope[1:-1, 1:-1] = np.where(ok, slope_in, nd)
    aspect[1:-1, 1:-1] = np.where(ok, aspect_in, nd)
    return (Grid(slope, dsm.transform, nd, "radians"),
            Grid(aspect, dsm.transform, nd, "radians"))


def decompose_normals(slope, aspect):
    """Unit surface normals from slope/aspect; flat cells map to (0, 0, 1)."""
    require_aligned(slope, aspect, "slope and aspect")
    valid = slope.valid & aspect.valid
    s = np.where(valid, slope.values, 0.0)
    asp = np.where(valid, aspect.values, 0.0)
    flat = valid & (asp == ASPECT_FLAT)
    asp = np.where(flat, 0.0, asp)
    horiz = np.where(flat, 0.0, np.sin(s))
    nz = np.where(flat, 1.0, np.cos(s))
    nx = horiz * np.sin(asp)
    ny = horiz * np.cos(asp)
    nx[~valid] = 0.0
    ny[~valid] = 0.0
    nz[~valid] = 0.0
    return NormalField(nx, ny, nz, valid, slope.transform)


def _window_sums_naive(arrays, half):
    h, w = arrays[0].shape
    padded = [np.pad(a, half) for a in arrays]
    out = [np.zeros((h, w), dtype=np.float64) for _ in arrays]
    size = 2 * half + 1
    for dr in range(size):
        for dc in range(size):
            for acc, p in zip(out, padded):
                acc += p[dr:dr + h, dc:dc + w]
    return out


def _summed_area(a):
    """Zero-padded inclusive prefix sums: ``S[r, c] = a[:r, :c].sum()``."""
    h, w = a.shape
    s = np.zeros((h + 1, w + 1), dtype=np.longdouble)
    np.cumsum(a, axis=0, dtype=np.longdouble, out=s[1:, 1:])
    np.cumsum(s[1:, 1:], axis=1, out=s[1:, 1:])
    return s


def _window_sums_sat(arrays, half):
    h, w = arrays[0].shape
    r0 = np.clip(np.arange(h) - half, 0, h)[:, None]
    r1 = np.clip(np.arange(h) + half + 1, 0, h)[:, None]
    c0 = np.clip(np.arange(w) - half, 0, w)[None, :]
    c1 = np.clip(np.arange(w) + half + 1, 0, w)[None, :]
    out = []
    for a in arrays:
        s = _summed_area(a)
        win = s[r1, c1] - s[r0, c1] - s[r1, c0] + s[r0, c0]
        out.append(win.astype(np.float64))
    return out


def vrm_from_normals(n, p, kernel="sat", nodata=-9999.0):
    """VRM grid (dimensionless) from a normal field."""
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    h, w = n.shape
    if p.window > w or p.window > h:
        raise WindowError(f"larger than grid extent {w}x{h}", p.window)
    half = p.window // 2
    count = n.valid.astype(np.float64)
    sums = _window_sums_naive if kernel == "naive" else _window_sums_sat
    sx, sy, sz, cnt = sums([n.nx, n.ny, n.nz, count], half)
    cnt = np.rint(cnt)

    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.sqrt(sx * sx + sy * sy + sz * sz)
        out = 1.0 - r / cnt
    out = np.clip(out, 0.0, 1.0)
    keep = n.valid & (cnt / (p.window * p.window) >= p.min_valid_fraction) & (cnt > 0)
    out = np.where(keep, out, nodata)
    return Grid(out, n.transform, nodata, "dimensionless")


def vrm(dsm, p, kernel="sat"):
    """Slope/aspect, normals, then windowed VRM."""
    slope, aspect = slope_aspect(dsm)
    return vrm_from_normals(decompose_normals(slope, aspect), p, kernel, slope.nodata)


def vrm_multiscale(dsm, windows=DEFAULT_WINDOWS, kernel="sat", min_valid_fraction=0.5):
    """One VRM grid per window, keyed in the order given."""
    windows = list(windows)
    if not windows:
        raise ValueError("no windows given")
    if len(set(windows)) != len(windows):
        raise ValueError(f"duplicate windows in {windows}")
    params = [VrmParams(w, min_valid_fraction) for w in windows]
    for p in params:
        if p.window > dsm.width or p.window > dsm.height:
            raise WindowError(f"larger than grid extent {dsm.width}x{dsm.height}", p.window)
    slope, aspect = slope_aspect(dsm)
    normals = decompose_normals(slope, aspect)
    out = {}
    for p in params:
        try:
            out[p.window] = vrm_from_normals(normals, p, kernel, slope.nodata)
        except WindowError:
            raise
        except ValueError as e:
            raise WindowError(str(e), p.window) from e
    return out
