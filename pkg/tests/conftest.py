import os
import sys
import time

import numpy as np
import pytest

from coraltk.raster import ClassMask, GeoTransform, Grid

DATA = os.path.join(os.path.dirname(__file__), "data", "synthetic")


def grid(values, cell=1.0, origin=(0.0, 0.0), nodata=-9999.0, units="meters"):
    return Grid(np.asarray(values, dtype=float), GeoTransform(origin[0], origin[1], cell), nodata, units)


def mask(ids, cell=1.0, origin=(0.0, 0.0)):
    return ClassMask(np.asarray(ids), GeoTransform(origin[0], origin[1], cell))


def random_plane(rng, shape=(64, 64), cell=1.0):
    gx, gy = rng.uniform(-3, 3, size=2)
    c = rng.uniform(-10, 10)
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]].astype(float)
    return grid(c + gx * xx * cell + gy * yy * cell, cell=cell)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def data_dir():
    return DATA


SUITE_LIMIT = 60.0
_session = {}


def pytest_sessionstart(session):
    _session["t0"] = time.perf_counter()


@pytest.hookimpl(tryfirst=True)
def pytest_sessionfinish(session, exitstatus):
    mod = sys.modules.get("test_acceptance")
    if not getattr(mod, "RESULTS", None):
        return
    dt = time.perf_counter() - _session["t0"]
    ok = dt < SUITE_LIMIT
    _session["runtime"] = f"{'PASS' if ok else 'FAIL'} suite runtime {dt:.1f} s (limit {SUITE_LIMIT:.0f} s)"
    if not ok:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = list(getattr(mod, "RESULTS", []))
    if not lines:
        return
    terminalreporter.section("acceptance")
    for line in lines + [_session.get("runtime", "")]:
        if line:
            terminalreporter.write_line(line)
