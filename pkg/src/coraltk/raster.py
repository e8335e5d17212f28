"""Georeferenced grids, class masks and ESRI ASCII grid I/O.

Row 0 of every array is the northernmost row. The transform origin is the
lower-left (south-west) corner of the raster, as in the ASCII grid header.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALIGN_TOL = 1e-9
MASK_NODATA = 255
BACKGROUND, LIVE, DEAD = 0, 1, 2
CLASS_IDS = (BACKGROUND, LIVE, DEAD)
CLASS_NAMES = {BACKGROUND: "background", LIVE: "live", DEAD: "dead"}

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


class GridFormatError(ValueError):
    """Malformed ASCII grid text. Carries 1-based line/column context."""

    def __init__(self, msg, line=None, col=None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {col}" if col is not None else "") + ": "
        super().__init__(where + msg)


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class GeoTransform:
    origin_x: float
    origin_y: float
    cell_size: float

    def __post_init__(self):
        if not self.cell_size > 0:
            raise ValueError(f"cell_size must be > 0, got {self.cell_size}")

    def cell_of(self, x, y, height):
        """Return (row, col) of the cell containing world point(s) (x, y)."""
        col = np.floor((np.asarray(x, dtype=float) - self.origin_x) / self.cell_size)
        up = np.floor((np.asarray(y, dtype=float) - self.origin_y) / self.cell_size)
        row = height - 1 - up
        return row.astype(np.int64), col.astype(np.int64)


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    """Single-band real raster. ``values`` is a read-only (height, width) array."""

    values: np.ndarray
    transform: GeoTransform
    nodata: float = -9999.0
    units: str = "meters"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ValueError(f"grid values must be a non-empty 2-D array, got shape {v.shape}")
        if not math.isfinite(self.nodata):
            raise ValueError("nodata sentinel must be finite")
        if self.units not in ("meters", "dimensionless", "radians"):
            raise ValueError(f"unknown unit tag {self.units!r}")
        bad = ~np.isfinite(v) & (v != self.nodata)
        if bad.any():
            r, c = np.argwhere(bad)[0]
            raise ValueError(f"non-finite value at row {r}, col {c}")
        if self.units == "dimensionless":
            vv = v[v != self.nodata]
            if vv.size and (vv.min() < 0 or vv.max() > 1):
                raise ValueError("dimensionless grid values must lie in [0, 1]")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    @property
    def valid(self):
        return self.values != self.nodata

    def __eq__(self, other):
        if not isinstance(other, Grid):
            return NotImplemented
        return (
            self.transform == other.transform
            and _same_bits(self.nodata, other.nodata)
            and self.units == other.units
            and self.values.shape == other.values.shape
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def with_values(self, values, units=None):
        return Grid(values, self.transform, self.nodata, units or self.units)


@dataclass(frozen=True, eq=False)
class ClassMask:
    """Integer class raster: 0 background, 1 live, 2 dead, 255 nodata."""

    ids: np.ndarray
    transform: GeoTransform
    allowed: tuple = field(default=CLASS_IDS)

    def __post_init__(self):
        a = np.asarray(self.ids)
        if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
            raise ValueError(f"mask must be a non-empty 2-D array, got shape {a.shape}")
        if not np.issubdtype(a.dtype, np.integer):
            if not np.all(np.equal(np.mod(a, 1), 0)):
                raise ValueError("mask ids must be integers")
        a = a.astype(np.int64)
        ok = np.isin(a, list(self.allowed) + [MASK_NODATA])
        if not ok.all():
            r, c = np.argwhere(~ok)[0]
            raise ValueError(f"class id {a[r, c]} at row {r}, col {c} not in {self.allowed} or 255")
        object.__setattr__(self, "ids", _readonly(a.astype(np.uint8)))

    @property
    def height(self):
        return self.ids.shape[0]

    @property
    def width(self):
        return self.ids.shape[1]

    @property
    def nodata(self):
        return MASK_NODATA

    def __eq__(self, other):
        if not isinstance(other, ClassMask):
            return NotImplemented
        return self.transform == other.transform and np.array_equal(self.ids, other.ids)

    __hash__ = None


def _same_bits(a, b):
    return np.float64(a).tobytes() == np.float64(b).tobytes()


def check_aligned(a, b, tol=ALIGN_TOL):
    """True iff two rasters share shape and transform to within ``tol`` meters."""
    if (a.width, a.height) != (b.width, b.height):
        return False
    ta, tb = a.transform, b.transform
    return (
        abs(ta.origin_x - tb.origin_x) <= tol
        and abs(ta.origin_y - tb.origin_y) <= tol
        and abs(ta.cell_size - tb.cell_size) <= tol
    )


def require_aligned(a, b, what="rasters"):
    if not check_aligned(a, b):
        raise AlignmentError(
            f"{what} are not aligned: {a.width}x{a.height} @ {a.transform} "
            f"vs {b.width}x{b.height} @ {b.transform}"
        )


# -- ASCII grid -------------------------------------------------------------


def _parse_header(lines):
    header = {}
    n = 0
    for n, line in enumerate(lines):
        toks = line.split()
        if not toks:
            continue
        key = toks[0].lower()
        if key not in _HEADER_KEYS:
            # first non-header line starts the data block
            try:
                float(toks[0])
            except ValueError:
                raise GridFormatError(f"unknown header key {toks[0]!r}", n + 1, 1) from None
            break
        if len(toks) != 2:
            raise GridFormatError(f"header key {toks[0]!r} needs exactly one value", n + 1)
        if key in header:
            raise GridFormatError(f"duplicate header key {toks[0]!r}", n + 1, 1)
        header[key] = (toks[1], n + 1)
    else:
        n = len(lines)
    missing = [k for k in _HEADER_KEYS if k not in header]
    if missing:
        raise GridFormatError(f"missing header key(s): {', '.join(missing)}", n + 1)
    return header, n


def _header_number(header, key, integer=False):
    tok, line = header[key]
    try:
        if integer:
            return int(tok)
        return float(tok)
    except ValueError:
        kind = "integer" if integer else "number"
        raise GridFormatError(f"{key} expects a {kind}, got {tok!r}", line, 2) from None


def _parse_ascii(text):
    lines = text.splitlines()
    header, start = _parse_header(lines)
    ncols = _header_number(header, "ncols", integer=True)
    nrows = _header_number(header, "nrows", integer=True)
    if ncols < 1 or nrows < 1:
        raise GridFormatError("ncols and nrows must be >= 1", header["ncols"][1])
    xll = _header_number(header, "xllcorner")
    yll = _header_number(header, "yllcorner")
    cs = _header_number(header, "cellsize")
    nodata = _header_number(header, "nodata_value")
    if not cs > 0:
        raise GridFormatError(f"cellsize must be > 0, got {header['cellsize'][0]}", header["cellsize"][1], 2)

    chunks = []
    count = 0
    expected = ncols * nrows
    for i in range(start, len(lines)):
        toks = lines[i].split()
        if not toks:
            continue
        try:
            row = np.array(toks, dtype=np.float64)
        except ValueError:
            for j, t in enumerate(toks):
                try:
                    float(t)
                except ValueError:
                    raise GridFormatError(f"non-numeric token {t!r}", i + 1, j + 1) from None
            raise
        count += row.size
        if count > expected:
            raise GridFormatError(f"too many values: expected {expected} ({nrows} rows x {ncols} cols)", i + 1)
        chunks.append(row)
    if count != expected:
        raise GridFormatError(f"wrong cell count: got {count}, expected {expected} ({nrows} rows x {ncols} cols)",
                              len(lines))
    values = np.concatenate(chunks).reshape(nrows, ncols)
    return values, GeoTransform(xll, yll, cs), nodata


def read_ascii_grid(text, units="meters"):
    """Parse ESRI ASCII grid text into a :class:`Grid`."""
    values, transform, nodata = _parse_ascii(text)
    bad = ~np.isfinite(values) & (values != nodata)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise GridFormatError(f"non-finite value at row {r + 1}, col {c + 1}")
    return Grid(values, transform, nodata, units)


def read_ascii_mask(text):
    """Parse an ASCII grid of integer class ids into a :class:`ClassMask`."""
    values, transform, nodata = _parse_ascii(text)
    values = np.where(values == nodata, MASK_NODATA, values)
    if not np.all(np.mod(values, 1) == 0):
        raise GridFormatError("class mask contains non-integer values")
    try:
        return ClassMask(values.astype(np.int64), transform)
    except ValueError as e:
        raise GridFormatError(str(e)) from None


def format_number(x):
    """Shortest text that parses back to exactly ``x``."""
    x = float(x)
    if x == int(x) and abs(x) < 1e16:
        return str(int(x)) if not (x == 0 and math.copysign(1, x) < 0) else "-0"
    return repr(x)


def _header_text(width, height, t, nodata):
    return (
        f"ncols {width}\n"
        f"nrows {height}\n"
        f"xllcorner {format_number(t.origin_x)}\n"
        f"yllcorner {format_number(t.origin_y)}\n"
        f"cellsize {format_number(t.cell_size)}\n"
        f"NODATA_value {nodata}\n"
    )


def write_ascii_grid(g):
    """Serialize a :class:`Grid`; ``read_ascii_grid`` of the result equals ``g``."""
    nd = format_number(g.nodata)
    out = [_header_text(g.width, g.height, g.transform, nd)]
    for row in g.values:
        out.append(" ".join(nd if v == g.nodata else format_number(v) for v in row.tolist()))
        out.append("\n")
    return "".join(out)


def write_ascii_mask(m):
    out = [_header_text(m.width, m.height, m.transform, MASK_NODATA)]
    for row in m.ids:
        out.append(" ".join(map(str, row.tolist())))
        out.append("\n")
    return "".join(out)


def load_grid(path, units="meters"):
    with open(path, encoding="ascii") as f:
        return read_ascii_grid(f.read(), units)


def load_mask(path):
    with open(path, encoding="ascii") as f:
        return read_ascii_mask(f.read())
