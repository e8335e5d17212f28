"""Check-point RMSE and the RootSIFT descriptor transform."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

import numpy as np

SIFT_LENGTH = 128
GCP_COLUMNS = ("id", "mx", "my", "mz", "rx", "ry", "rz")


@dataclass(frozen=True)
class GcpObservation:
    id: str
    measured: tuple
    reference: tuple

    def __post_init__(self):
        coords = tuple(self.measured) + tuple(self.reference)
        if len(coords) != 6 or not all(math.isfinite(c) for c in coords):
            raise ValueError(f"GCP {self.id}: need finite (x, y, z) for measured and reference")


@dataclass(frozen=True)
class RmseReport:
    horizontal: float
    vertical: float
    total: float
    n: int

    def as_dict(self):
        return asdict(self)


def gcp_rmse(obs):
    """Horizontal, vertical and total RMSE of ``measured - reference``."""
    obs = list(obs)
    if not obs:
        raise ValueError("no GCP observations")
    d = np.array([np.subtract(o.measured, o.reference) for o in obs], dtype=np.float64)
    n = len(obs)
    h2 = math.fsum((d[:, 0] ** 2 + d[:, 1] ** 2).tolist()) / n
    v2 = math.fsum((d[:, 2] ** 2).tolist()) / n
    t2 = math.fsum((d * d).ravel().tolist()) / n
    return RmseReport(math.sqrt(h2), math.sqrt(v2), math.sqrt(t2), n)


def read_gcp_csv(text):
    """Observations from CSV with header ``id,mx,my,mz,rx,ry,rz`` (meters)."""
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None or tuple(f.strip() for f in reader.fieldnames) != GCP_COLUMNS:
        raise ValueError(f"GCP CSV header must be {','.join(GCP_COLUMNS)}, got {reader.fieldnames}")
    out = []
    for lineno, row in enumerate(reader, start=2):
        try:
            vals = [float(row[k]) for k in GCP_COLUMNS[1:]]
        except (TypeError, ValueError):
            raise ValueError(f"line {lineno}: non-numeric coordinate") from None
        out.append(GcpObservation(row["id"].strip(), tuple(vals[:3]), tuple(vals[3:])))
    return out


def rootsift(d):
    """L1-normalize then take the element-wise square root.

    Accepts one 128-vector or an (N, 128) batch.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[-1] != SIFT_LENGTH or d.ndim not in (1, 2):
        raise ValueError(f"descriptors must have length {SIFT_LENGTH}, got shape {d.shape}")
    if not np.isfinite(d).all() or (d < 0).any():
        raise ValueError("descriptors must be finite and non-negative")
    total = d.sum(axis=-1, keepdims=True)
    if (total <= 0).any():
        raise ValueError("all-zero descriptor")
    return np.sqrt(d / total)
