import numpy as np
import pytest

from suppalign import kernels


def brute_nearest(pts, support):
    out = np.empty(len(pts))
    for i, p in enumerate(pts):
        out[i] = min(np.sqrt(((p - s) ** 2).sum()) for s in support)
    return out


def test_nearest_dists_matches_brute_force():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(17, 3))
        sup = rng.normal(size=(9, 3))
        assert np.allclose(kernels.nearest_dists(pts, sup), brute_nearest(pts, sup))


def test_nearest_dists_labeled_matches_brute_force():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(11, 2))
        sup = rng.normal(size=(7, 2))
        la = rng.integers(0, 3, size=11)
        lb = rng.integers(0, 3, size=7)
        pen = 5.0
        got = kernels.nearest_dists_labeled(pts, la, sup, lb, pen)
        want = np.empty(11)
        for i in range(11):
            best = np.inf
            for j in range(7):
                d = np.sqrt(((pts[i] - sup[j]) ** 2).sum())
                if la[i] != lb[j]:
                    d += pen
                best = min(best, d)
            want[i] = best
        assert np.allclose(got, want)


def test_pairwise_dists_matches_brute_force():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(6, 4)), rng.normal(size=(8, 4))
    want = np.array([[np.sqrt(((x - y) ** 2).sum()) for y in b] for x in a])
    assert np.allclose(kernels.pairwise_dists(a, b), want)


def test_nearest_abs_diff_values_and_tie_break():
    d, idx = kernels.nearest_abs_diff([0.5], [0.4, 0.6, 0.9])
    assert np.isclose(d[0], 0.1)
    assert idx[0] == 0  # tie between 0.4 and 0.6 goes to the lower index
    d, idx = kernels.nearest_abs_diff([0.0, 1.0], [0.25, 0.9])
    assert np.allclose(d, [0.25, 0.1])
    assert idx.tolist() == [0, 1]


def test_both_flavours_agree():
    # the loop flavour runs as plain python when numba is not the active
    # backend, so this agreement holds under either setting
    for seed in range(5):
        rng = np.random.default_rng(seed)
        pts = rng.normal(size=(13, 3))
        sup = rng.normal(size=(6, 3))
        la = rng.integers(0, 2, size=13)
        lb = rng.integers(0, 2, size=6)
        assert np.allclose(
            kernels._numpy_nearest_dists(pts, sup),
            kernels._numba_nearest_dists(pts, sup),
        )
        assert np.allclose(
            kernels._numpy_nearest_dists_labeled(pts, la, sup, lb, 3.0),
            kernels._numba_nearest_dists_labeled(pts, la, sup, lb, 3.0),
        )
        assert np.allclose(
            kernels._numpy_pairwise_dists(pts, sup),
            kernels._numba_pairwise_dists(pts, sup),
        )
        va, vb = rng.normal(size=20), rng.normal(size=15)
        d1, i1 = kernels._numpy_nearest_abs_diff(va, vb)
        d2, i2 = kernels._numba_nearest_abs_diff(va, vb)
        assert np.allclose(d1, d2)
        assert (i1 == i2).all()


def test_empty_support_rejected():
    with pytest.raises(ValueError):
        kernels.nearest_dists(np.ones((2, 2)), np.empty((0, 2)))
    with pytest.raises(ValueError):
        kernels.nearest_abs_diff([], [1.0])


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        kernels.nearest_dists(np.ones((2, 2)), np.ones((2, 3)))
