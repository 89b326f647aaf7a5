import itertools

import numpy as np
import pytest

from polypack import kernels


def brute_pairs(a, b, period, reach, same):
    out = []
    for i in range(len(a)):
        for j in range(len(b)):
            if same and j <= i:
                continue
            d = b[j] - a[i]
            d = np.abs(d - period * np.floor(d / period + 0.5))
            if np.all(d <= reach):
                out.append((i, j))
    return out


def brute_hits(q, t, radius, period):
    hits = []
    for x in q:
        d = t - x
        d = d - period * np.floor(d / period + 0.5)
        hits.append(bool(np.any((d * d).sum(axis=1) <= radius ** 2)))
    return np.array(hits)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_pairs_match_brute_force(backend, rng, n):
    period = rng.uniform(0.5, 2.0, n)
    pts = rng.random((150, n)) * period
    other = rng.random((90, n)) * period
    reach = rng.uniform(0.05, 0.4, n) * period
    for a, b, same in ((pts, pts, True), (pts, other, False)):
        ia, ib = kernels.pairs_within(a, b, period, reach, same, backend=backend)
        assert list(zip(ia.tolist(), ib.tolist())) == brute_pairs(a, b, period, reach, same)


def test_pairs_large_reach(backend, rng):
    # reach beyond half a period collapses the cell list to one bin
    period = np.array([1.0, 1.0])
    pts = rng.random((40, 2))
    ia, ib = kernels.pairs_within(pts, pts, period, np.array([0.7, 0.7]), True, backend=backend)
    assert len(ia) == 40 * 39 // 2


@pytest.mark.parametrize("n", [2, 3])
def test_point_ball_hits(backend, rng, n):
    period = rng.uniform(0.5, 2.0, n)
    t = rng.random((60, n)) * period
    q = rng.random((400, n)) * period
    r = 0.15
    got = kernels.any_hit(q, 0.0, t, 0.0, r, period, kernels.MODE_POINT_BALL, backend=backend)
    assert np.array_equal(got, brute_hits(q, t, r, period))


def test_box_modes(backend, rng):
    period = np.array([1.0, 1.5])
    t = rng.random((30, 2)) * period
    q = rng.random((300, 2)) * period
    qh, th = np.array([0.03, 0.05]), np.array([0.04, 0.02])
    got_bb = kernels.any_hit(q, qh, t, th, 0.0, period, kernels.MODE_BOX_BOX, backend=backend)
    got_pb = kernels.any_hit(q, 0.0, t, th, 0.0, period, kernels.MODE_POINT_BOX, backend=backend)
    got_xb = kernels.any_hit(q, qh, t, 0.0, 0.06, period, kernels.MODE_BOX_BALL, backend=backend)
    for k, x in enumerate(q):
        d = t - x
        d = np.abs(d - period * np.floor(d / period + 0.5))
        assert got_bb[k] == np.any(np.all(d < qh + th, axis=1))
        assert got_pb[k] == np.any(np.all(d <= th, axis=1))
        ex = np.maximum(d - qh, 0.0)
        assert got_xb[k] == np.any((ex * ex).sum(axis=1) <= 0.06 ** 2)


def test_empty_inputs(backend):
    z = np.zeros((0, 2))
    ia, ib = kernels.pairs_within(z, z, [1.0, 1.0], [0.1, 0.1], backend=backend)
    assert len(ia) == len(ib) == 0
    assert len(kernels.any_hit(z, 0.0, z, 0.0, 0.1, [1.0, 1.0], 0, backend=backend)) == 0


@pytest.mark.skipif(not kernels.HAVE_CYTHON, reason="extension not built")
def test_backends_agree_unsorted(rng):
    period = np.array([1.0, 2.0, 1.5])
    pts = rng.random((2000, 3)) * period
    reach = np.full(3, 0.12)
    res = []
    for be in ("python", "cython"):
        ia, ib = kernels.pairs_within(pts, pts, period, reach, True, sort=False, backend=be)
        res.append(sorted(zip(ia.tolist(), ib.tolist())))
    assert res[0] == res[1]


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.pairs_within(np.zeros((1, 1)), np.zeros((1, 1)), [1.0], [0.1], backend="fortran")


def test_backend_names():
    assert kernels.BACKEND in ("cython", "python")


def test_env_forces_python_backend():
    import os
    import subprocess
    import sys
    env = dict(os.environ, POLYPACK_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import polypack; print(polypack.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
