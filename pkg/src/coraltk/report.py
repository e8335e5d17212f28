"""Deterministic JSON/CSV serialization and atomic artifact writes."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile

from .change import Histogram, SummaryStats, ViolinData


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return _clean(obj.item())
    return obj


def to_json(obj):
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def to_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_atomic(path, data):
    """Write to a temp file in the target directory, then rename over ``path``."""
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_outputs(outdir, artifacts):
    """Write ``{name: str | bytes}`` into ``outdir``, one atomic rename per artifact."""
    os.makedirs(outdir, exist_ok=True)
    for name, data in artifacts.items():
        if isinstance(data, str):
            data = data.encode("utf-8")
        write_atomic(os.path.join(outdir, name), data)


# -- result records ---------------------------------------------------------

STATS_FIELDS = ("count", "mean", "median", "q1", "q3", "min", "max")


def stats_dict(s: SummaryStats):
    return s.as_dict()


def histogram_dict(h: Histogram):
    return {"bin_width": h.bin_width, "origin": h.origin, "counts": list(h.counts)}


def violin_dict(v: ViolinData):
    return {
        "class_id": v.class_id,
        "window": v.window,
        "empty": v.empty,
        "stats": None if v.empty else stats_dict(v.samples_summary),
        "bandwidth": v.bandwidth,
        "density": [list(p) for p in v.density],
    }


def stats_row(s):
    """CSV cells for ``STATS_FIELDS``; an empty selection has count 0."""
    if s is None:
        return [0] + [None] * (len(STATS_FIELDS) - 1)
    return [getattr(s, f) for f in STATS_FIELDS]
