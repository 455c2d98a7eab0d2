"""Nearest-neighbour distance kernels, the package's only hot loops.

Two interchangeable backends compute squared-Euclidean nearest rows:
a numba ``@njit`` kernel (default when numba imports) and a pure-numpy
path. Set ``SPLITGUARD_NO_NUMBA=1`` to force the numpy path. Both
backends accumulate over the feature axis in the same left-to-right
order, so results are bit-identical and ties (resolved first-index-wins)
agree exactly.

``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_CHUNK = 512  # query rows per numpy block, bounds the (chunk, n) temporaries


def _nearest_index_numpy(train: np.ndarray, queries: np.ndarray) -> np.ndarray:
    n, dim = train.shape
    out = np.empty(queries.shape[0], dtype=np.int64)
    for start in range(0, queries.shape[0], _CHUNK):
        block = queries[start : start + _CHUNK]
        acc = np.zeros((block.shape[0], n))
        for t in range(dim):
            diff = block[:, t, None] - train[None, :, t]
            acc += diff * diff
        out[start : start + _CHUNK] = np.argmin(acc, axis=1)
    return out


def _nearest_other_index_numpy(points: np.ndarray) -> np.ndarray:
    n, dim = points.shape
    out = np.empty(n, dtype=np.int64)
    for start in range(0, n, _CHUNK):
        block = points[start : start + _CHUNK]
        acc = np.zeros((block.shape[0], n))
        for t in range(dim):
            diff = block[:, t, None] - points[None, :, t]
            acc += diff * diff
        for i in range(block.shape[0]):
            acc[i, start + i] = np.inf
        out[start : start + _CHUNK] = np.argmin(acc, axis=1)
    return out


_FORCE_NUMPY = os.environ.get("SPLITGUARD_NO_NUMBA", "") not in ("", "0")

if not _FORCE_NUMPY:
    try:
        from numba import njit
    except ImportError:
        _FORCE_NUMPY = True

if not _FORCE_NUMPY:

    @njit(cache=True)
    def _nearest_index_numba(train, queries):  # pragma: no cover - jitted
        n, dim = train.shape
        out = np.empty(queries.shape[0], dtype=np.int64)
        for i in range(queries.shape[0]):
            best = -1
            best_d = np.inf
            for j in range(n):
                s = 0.0
                for t in range(dim):
                    diff = queries[i, t] - train[j, t]
                    s += diff * diff
                if s < best_d:
                    best_d = s
                    best = j
            out[i] = best
        return out

    @njit(cache=True)
    def _nearest_other_index_numba(points):  # pragma: no cover - jitted
        n, dim = points.shape
        out = np.empty(n, dtype=np.int64)
        for i in range(n):
            best = -1
            best_d = np.inf
            for j in range(n):
                if j == i:
                    continue
                s = 0.0
                for t in range(dim):
                    diff = points[i, t] - points[j, t]
                    s += diff * diff
                if s < best_d:
                    best_d = s
                    best = j
            out[i] = best
        return out

    _nearest_index_impl = _nearest_index_numba
    _nearest_other_index_impl = _nearest_other_index_numba
    BACKEND = "numba"
else:
    _nearest_index_impl = _nearest_index_numpy
    _nearest_other_index_impl = _nearest_other_index_numpy
    BACKEND = "numpy"


def backend() -> str:
    """Name of the active backend, 'numba' or 'numpy'."""
    return BACKEND


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {m.shape}")
    return m


def nearest_index(train, queries) -> np.ndarray:
    """Index of the squared-Euclidean nearest ``train`` row per query row.

    Ties go to the smallest index.
    """
    tr = _as_matrix(train, "train")
    qu = _as_matrix(queries, "queries")
    if tr.shape[0] == 0:
        raise ValueError("train must contain at least one row")
    if tr.shape[1] != qu.shape[1]:
        raise ValueError(f"dimension mismatch: train has {tr.shape[1]}, queries have {qu.shape[1]}")
    if qu.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return _nearest_index_impl(tr, qu)


def nearest_other_index(points) -> np.ndarray:
    """Per row, index of the nearest *other* row (leave-one-out), ties to smallest index."""
    pts = _as_matrix(points, "points")
    if pts.shape[0] < 2:
        raise ValueError("need at least two rows")
    return _nearest_other_index_impl(pts)
