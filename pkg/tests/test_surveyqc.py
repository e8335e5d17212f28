import math

import numpy as np
import pytest

from coraltk.surveyqc import GcpObservation, gcp_rmse, read_gcp_csv, rootsift


def obs(residuals_mm, base=(10.0, 20.0, -5.0)):
    out = []
    for i, (dx, dy, dz) in enumerate(residuals_mm):
        ref = base
        meas = (base[0] + dx / 1000, base[1] + dy / 1000, base[2] + dz / 1000)
        out.append(GcpObservation(f"p{i}", meas, ref))
    return out


def test_zero_residuals():
    r = gcp_rmse([GcpObservation("a", (1, 2, 3), (1, 2, 3))])
    assert (r.horizontal, r.vertical, r.total, r.n) == (0, 0, 0, 1)


def test_three_four_five_oracle():
    r = gcp_rmse([GcpObservation("a", (0.003, 0.004, 0.0), (0, 0, 0)),
                  GcpObservation("b", (0.0, 0.0, 0.005), (0, 0, 0))])
    assert r.horizontal == pytest.approx(math.sqrt(12.5) / 1000, abs=1e-15)
    assert r.vertical == pytest.approx(math.sqrt(12.5) / 1000, abs=1e-15)
    assert r.total == 0.005
    assert abs(r.total ** 2 - r.horizontal ** 2 - r.vertical ** 2) < 1e-12


def test_permutation_and_translation_invariance(rng):
    res = rng.normal(scale=3, size=(6, 3)).tolist()
    a = gcp_rmse(obs(res))
    b = gcp_rmse(obs(res[::-1]))
    assert a == b
    c = gcp_rmse(obs(res, base=(10.5, 19.0, -4.0)))
    assert c.total == pytest.approx(a.total, abs=1e-12)


def test_empty():
    with pytest.raises(ValueError):
        gcp_rmse([])


def test_csv():
    text = "id,mx,my,mz,rx,ry,rz\nA,1.003,2.004,3,1,2,3\nB,1,2,3.005,1,2,3\n"
    o = read_gcp_csv(text)
    assert [x.id for x in o] == ["A", "B"]
    assert gcp_rmse(o).total == pytest.approx(0.005, abs=1e-12)
    with pytest.raises(ValueError):
        read_gcp_csv("id,x,y\n")
    with pytest.raises(ValueError):
        read_gcp_csv("id,mx,my,mz,rx,ry,rz\nA,1,2,nope,1,2,3\n")


def test_rootsift_one_hot_and_uniform():
    e = np.zeros(128)
    e[17] = 5.0
    assert np.array_equal(rootsift(e), np.eye(128)[17])
    u = rootsift(np.full(128, 3.0))
    assert np.allclose(u, 1 / math.sqrt(128), atol=1e-15)
    assert u[0] == pytest.approx(0.088388, abs=1e-6)


def test_rootsift_unit_norm_and_scale_invariance(rng):
    d = rng.integers(0, 256, size=(200, 128)).astype(float)
    d[:, 0] += 1
    out = rootsift(d)
    assert np.abs(np.linalg.norm(out, axis=1) - 1).max() <= 1e-12
    assert np.allclose(rootsift(d * 3.7), out, atol=1e-15)


def test_rootsift_errors():
    with pytest.raises(ValueError):
        rootsift(np.zeros(128))
    with pytest.raises(ValueError):
        rootsift(-np.ones(128))
    with pytest.raises(ValueError):
        rootsift(np.ones(64))
