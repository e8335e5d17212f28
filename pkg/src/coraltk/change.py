"""DSM differencing, truncation for display, and class-masked statistics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .raster import Grid, require_aligned

MEDIAN_CONVENTION = "lower"
KDE_POINTS = 256


class EmptySelectionError(ValueError):
    pass


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    median: float
    q1: float
    q3: float
    min: float
    max: float
    median_convention: str = MEDIAN_CONVENTION

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Histogram:
    bin_width: float
    origin: float
    counts: tuple

    @property
    def edges(self):
        return [self.origin + i * self.bin_width for i in range(len(self.counts) + 1)]

    @property
    def total(self):
        return sum(self.counts)


@dataclass(frozen=True)
class ViolinData:
    class_id: int
    window: int | None
    samples_summary: SummaryStats | None
    density: list = field(default_factory=list)
    bandwidth: float | None = None

    @property
    def empty(self):
        return self.samples_summary is None


def dsm_diff(later, earlier):
    """``later - earlier`` cell-wise; positive means the surface grew."""
    require_aligned(later, earlier, "DSMs")
    if later.units != "meters" or earlier.units != "meters":
        raise ValueError("both DSMs must be in meters")
    ok = later.valid & earlier.valid
    nd = later.nodata
    diff = np.where(ok, later.values - earlier.values, nd)
    # a genuine difference could land on the sentinel
    if np.any(ok & (diff == nd)):
        raise ValueError(f"difference collides with nodata sentinel {nd}")
    return Grid(diff, later.transform, nd, "meters")


def truncate(g, limit):
    """Clamp values to [-limit, +limit]; nodata untouched."""
    if not limit > 0:
        raise ValueError(f"limit must be > 0, got {limit}")
    v = np.where(g.valid, np.clip(g.values, -limit, limit), g.nodata)
    return g.with_values(v)


def select(g, mask=None, class_id=None):
    """Valid values of ``g``, optionally restricted to ``mask == class_id``."""
    keep = g.valid
    if mask is not None:
        require_aligned(g, mask, "grid and mask")
        if class_id is not None:
            keep = keep & (mask.ids == class_id)
        else:
            keep = keep & (mask.ids != mask.nodata)
    elif class_id is not None:
        raise ValueError("class_id given without a mask")
    return g.values[keep]


def summarize(values):
    v = np.sort(np.asarray(values, dtype=np.float64).ravel())
    if v.size == 0:
        raise EmptySelectionError("no cells selected")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75], method="lower")
    return SummaryStats(
        count=int(v.size),
        mean=math.fsum(v.tolist()) / v.size,
        median=float(med),
        q1=float(q1),
        q3=float(q3),
        min=float(v[0]),
        max=float(v[-1]),
    )


def masked_stats(g, mask=None, class_id=None):
    """Summary over non-nodata cells; median is the lower middle for even counts."""
    try:
        return summarize(select(g, mask, class_id))
    except EmptySelectionError:
        raise EmptySelectionError(
            "no cells selected" + ("" if class_id is None else f" for class {class_id}")
        ) from None


def histogram(g, bin_width, mask=None, class_id=None):
    """Half-open bins ``[edge, edge + bin_width)`` with 0 on a bin edge."""
    if not bin_width > 0:
        raise ValueError(f"bin_width must be > 0, got {bin_width}")
    v = select(g, mask, class_id)
    if v.size == 0:
        raise EmptySelectionError("no cells selected for histogram")
    idx = np.floor(v / bin_width).astype(np.int64)
    lo = int(idx.min())
    counts = np.bincount(idx - lo)
    return Histogram(bin_width, lo * bin_width, tuple(int(c) for c in counts))


def silverman_bandwidth(samples):
    """Silverman's rule, ``(4 / 3n) ** (1/5) * std`` with ddof=1."""
    x = np.asarray(samples, dtype=np.float64)
    n = x.size
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    return (4.0 / (3.0 * n)) ** 0.2 * sd


def gaussian_kde(samples, points, bandwidth=None):
    x = np.asarray(samples, dtype=np.float64).ravel()
    pts = np.asarray(points, dtype=np.float64)
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    dens = np.zeros_like(pts)
    norm = 1.0 / (x.size * h * math.sqrt(2 * math.pi))
    # chunked to bound memory at n * 256 doubles per chunk
    step = max(1, 2_000_000 // max(pts.size, 1))
    for i in range(0, x.size, step):
        u = (pts[None, :] - x[i:i + step, None]) / h
        dens += np.exp(-0.5 * u * u).sum(axis=0)
    return dens * norm


def violin_data(g, mask, classes, window=None, points=KDE_POINTS):
    """Per-class stats plus a Gaussian KDE on ``points`` evenly spaced values.

    The KDE spans [min, max] of the class samples. A class whose samples
    are all identical has no spread to estimate a bandwidth from, so it gets
    a bump of width ``max(1e-3 * |value|, 1e-9)`` evaluated on +-4 bandwidths.
    Classes with no cells come back as empty entries.
    """
    if not classes:
        raise ValueError("no classes requested")
    out = []
    for cid in classes:
        v = select(g, mask, cid)
        if v.size == 0:
            out.append(ViolinData(cid, window, None, []))
            continue
        stats = summarize(v)
        h = silverman_bandwidth(v)
        if h > 0:
            grid = np.linspace(stats.min, stats.max, points)
        else:
            h = max(1e-3 * abs(stats.median), 1e-9)
            grid = np.linspace(stats.median - 4 * h, stats.median + 4 * h, points)
        dens = gaussian_kde(v, grid, h)
        out.append(ViolinData(cid, window, stats, list(zip(grid.tolist(), dens.tolist())), h))
    return out
