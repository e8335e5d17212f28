"""Deterministic two-epoch synthetic survey used by the CLI tests and README.

Everything is a pure function of the seed; the generated files are
byte-identical across runs on one machine.
"""

from __future__ import annotations

import os

import numpy as np

from .mesh import Mesh, write_ply
from .raster import DEAD, LIVE, ClassMask, GeoTransform, Grid, write_ascii_grid, write_ascii_mask

SIZE = 256
CELL = 0.001
ORIGIN = (500.0, 1200.0)
MESH_STEP = 16


def _quantize(a):
    # 0.01 mm steps keep the ASCII files short and exactly reproducible
    return np.round(a, 5)


def make_dataset(seed=2019, size=SIZE):
    rng = np.random.default_rng(seed)
    t = GeoTransform(ORIGIN[0], ORIGIN[1], CELL)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)

    base = 0.02 * (xx / size) + 0.01 * np.sin(2 * np.pi * yy / 180.0)
    ids = np.zeros((size, size), dtype=np.int64)
    bumps = np.zeros((size, size))
    growth = np.zeros((size, size))
    for k in range(14):
        cy, cx = rng.uniform(20, size - 20, size=2)
        r = rng.uniform(8, 22)
        height = rng.uniform(0.02, 0.06)
        d2 = ((yy - cy) ** 2 + (xx - cx) ** 2) / r ** 2
        colony = d2 < 1.0
        # branching texture on top of a dome
        dome = height * np.clip(1 - d2, 0, None) * (1 + 0.15 * np.sin(xx * 1.3) * np.cos(yy * 1.1))
        bumps = np.maximum(bumps, dome)
        cls = LIVE if k % 3 else DEAD
        ids[colony] = cls
        if cls == LIVE:
            growth += np.where(colony, 0.018, 0.0)
        else:
            growth += np.where(colony, -0.012, 0.0)

    noise = rng.normal(0, 0.0005, size=(2, size, size))
    earlier = _quantize(base + bumps + noise[0])
    later = _quantize(base + bumps + growth + 0.004 + noise[1])
    # a ruler lying on the reef in the first epoch only
    earlier[200:206, 10:120] += 0.03
    earlier = _quantize(earlier)

    earlier[0:3, 250:256] = -9999.0
    later[0:3, 250:256] = -9999.0
    ids_nodata = ids.copy()
    ids_nodata[0:3, 250:256] = 255

    pred = ids_nodata.copy()
    flip = rng.random((size, size)) < 0.05
    pred[flip & (pred != 255)] = rng.integers(0, 3, size=(size, size))[flip & (pred != 255)]

    e = Grid(earlier, t)
    l_ = Grid(later, t)
    mask = ClassMask(ids_nodata, t)
    pred_mask = ClassMask(pred, t)
    return e, l_, mask, pred_mask


def make_mesh(dsm, step=MESH_STEP):
    """Regular triangulation of the DSM, one vertex every ``step`` cells."""
    t = dsm.transform
    rows = np.arange(0, dsm.height, step)
    cols = np.arange(0, dsm.width, step)
    z = np.where(dsm.valid, dsm.values, 0.0)
    verts = []
    for r in rows:
        for c in cols:
            x = t.origin_x + (c + 0.5) * t.cell_size
            y = t.origin_y + (dsm.height - r - 0.5) * t.cell_size
            verts.append((x, y, float(z[r, c])))
    nc = len(cols)
    faces = []
    for i in range(len(rows) - 1):
        for j in range(nc - 1):
            a = i * nc + j
            faces.append((a, a + 1, a + nc))
            faces.append((a + 1, a + nc + 1, a + nc))
    return Mesh(np.array(verts), np.array(faces))


def gcp_csv():
    rows = [
        ("GCP1", 500.010, 1200.010, -8.200, 500.0112, 1200.0085, -8.2021),
        ("GCP2", 500.240, 1200.020, -8.150, 500.2387, 1200.0221, -8.1487),
        ("GCP3", 500.030, 1200.230, -8.300, 500.0314, 1200.2288, -8.3016),
        ("GCP4", 500.220, 1200.240, -8.260, 500.2189, 1200.2413, -8.2588),
        ("CHK5", 500.128, 1200.131, -8.190, 500.1302, 1200.1286, -8.1918),
    ]
    out = ["id,mx,my,mz,rx,ry,rz"]
    out += [",".join([r[0]] + [repr(v) for v in r[1:]]) for r in rows]
    return "\n".join(out) + "\n"


def descriptors_csv(n=8, seed=7):
    rng = np.random.default_rng(seed)
    d = rng.integers(0, 256, size=(n, 128))
    return "\n".join(",".join(str(v) for v in row) for row in d.tolist()) + "\n"


def write_dataset(outdir, seed=2019):
    e, l_, mask, pred = make_dataset(seed)
    os.makedirs(outdir, exist_ok=True)
    files = {
        "dsm_2018.asc": write_ascii_grid(e),
        "dsm_2019.asc": write_ascii_grid(l_),
        "mask_2018.asc": write_ascii_mask(mask),
        "pred_2018.asc": write_ascii_mask(pred),
        "mesh_2018.ply": write_ply(make_mesh(e)),
        "gcp.csv": gcp_csv(),
        "descriptors.csv": descriptors_csv(),
    }
    for name, text in files.items():
        with open(os.path.join(outdir, name), "w", encoding="ascii", newline="\n") as f:
            f.write(text)
    return sorted(files)
