"""Hot numeric kernels: nearest-neighbour support distances.

Each kernel has a loop-style numba implementation and a vectorized numpy
fallback; :mod:`suppalign.backend` decides which one is bound to the public
name. Both flavours stay importable (``_numba_*`` / ``_numpy_*``) so the
benchmark and the agreement tests can compare them directly.

All kernels take C-contiguous float64 arrays. Distances are plain Euclidean;
the labeled variant adds a fixed penalty whenever class ids differ, which is
the product metric used for joint support divergences.
"""

from __future__ import annotations

import numpy as np

from .backend import BACKEND, maybe_njit

__all__ = [
    "BACKEND",
    "nearest_abs_diff",
    "nearest_dists",
    "nearest_dists_labeled",
    "pairwise_dists",
]


# ---------------------------------------------------------------------------
# numpy fallbacks (vectorized)


def _numpy_nearest_abs_diff(a, b):
    diff = np.abs(a[:, None] - b[None, :])
    idx = diff.argmin(axis=1)
    return diff[np.arange(a.shape[0]), idx], idx


def _numpy_nearest_dists(pts, support):
    d2 = ((pts[:, None, :] - support[None, :, :]) ** 2).sum(axis=2)
    return np.sqrt(d2.min(axis=1))


def _numpy_nearest_dists_labeled(pts, labels, support, support_labels, penalty):
    d = np.sqrt(((pts[:, None, :] - support[None, :, :]) ** 2).sum(axis=2))
    d = d + penalty * (labels[:, None] != support_labels[None, :])
    return d.min(axis=1)


def _numpy_pairwise_dists(a, b):
    return np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))


# ---------------------------------------------------------------------------
# numba loop kernels


@maybe_njit
def _numba_nearest_abs_diff(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.empty(n, dtype=np.float64)
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        best = abs(a[i] - b[0])
        best_j = 0
        for j in range(1, m):
            d = abs(a[i] - b[j])
            if d < best:
                best = d
                best_j = j
        out[i] = best
        idx[i] = best_j
    return out, idx


@maybe_njit
def _numba_nearest_dists(pts, support):
    n, dim = pts.shape
    m = support.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                t = pts[i, k] - support[j, k]
                acc += t * t
            if acc < best:
                best = acc
        out[i] = np.sqrt(best)
    return out


@maybe_njit
def _numba_nearest_dists_labeled(pts, labels, support, support_labels, penalty):
    n, dim = pts.shape
    m = support.shape[0]
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        best = np.inf
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                t = pts[i, k] - support[j, k]
                acc += t * t
            d = np.sqrt(acc)
            if labels[i] != support_labels[j]:
                d += penalty
            if d < best:
                best = d
        out[i] = best
    return out


@maybe_njit
def _numba_pairwise_dists(a, b):
    n, dim = a.shape
    m = b.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for k in range(dim):
                t = a[i, k] - b[j, k]
                acc += t * t
            out[i, j] = np.sqrt(acc)
    return out


# ---------------------------------------------------------------------------
# dispatch

if BACKEND == "numba":
    _nearest_abs_diff = _numba_nearest_abs_diff
    _nearest_dists = _numba_nearest_dists
    _nearest_dists_labeled = _numba_nearest_dists_labeled
    _pairwise_dists = _numba_pairwise_dists
else:
    _nearest_abs_diff = _numpy_nearest_abs_diff
    _nearest_dists = _numpy_nearest_dists
    _nearest_dists_labeled = _numpy_nearest_dists_labeled
    _pairwise_dists = _numpy_pairwise_dists


def _as2d(x):
    a = np.ascontiguousarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D point array, got shape {a.shape}")
    return a


def nearest_abs_diff(a, b):
    """Per-element nearest |a_i - b_j| and the argmin index j, both 1-D."""
    a = np.ascontiguousarray(a, dtype=np.float64).ravel()
    b = np.ascontiguousarray(b, dtype=np.float64).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("nearest_abs_diff needs nonempty inputs")
    return _nearest_abs_diff(a, b)


def nearest_dists(pts, support):
    """Euclidean distance from each row of pts to the closest row of support."""
    pts = _as2d(pts)
    support = _as2d(support)
    if support.shape[0] == 0:
        raise ValueError("empty support")
    if pts.shape[1] != support.shape[1]:
        raise ValueError("dimension mismatch between points and support")
    return _nearest_dists(pts, support)


def nearest_dists_labeled(pts, labels, support, support_labels, penalty):
    """Nearest distance under euclid + penalty*[label mismatch]."""
    pts = _as2d(pts)
    support = _as2d(support)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    support_labels = np.ascontiguousarray(support_labels, dtype=np.int64)
    if support.shape[0] == 0:
        raise ValueError("empty support")
    return _nearest_dists_labeled(pts, labels, support, support_labels, float(penalty))


def pairwise_dists(a, b):
    """Full Euclidean distance matrix between two point sets."""
    return _pairwise_dists(_as2d(a), _as2d(b))
