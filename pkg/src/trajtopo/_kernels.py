"""Hot numeric kernels with two interchangeable backends.

Each kernel exists twice: a numba ``@njit`` version and a vectorized
pure-numpy version. The numpy path is used when numba is unavailable or
when the environment variable ``TOPO_DISABLE_NUMBA=1`` is set. Both
backends are exercised against each other in the test suite and timed in
``bench/kernel_bench.py``.
"""
import os

import numpy as np

_DISABLED = os.environ.get("TOPO_DISABLE_NUMBA", "0") == "1"

try:
    if _DISABLED:
        raise ImportError
    from numba import njit, prange
    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


# ---------------------------------------------------------------------------
# Prim on a dense distance matrix: O(N^2), returns unsorted edge lengths.
# ---------------------------------------------------------------------------

def prim_mst_lengths_numpy(dist):
    """Edge lengths of an MST of the complete graph with weights ``dist``."""
    n = dist.shape[0]
    if n < 2:
        return np.empty(0, dtype=np.float64)
    lengths = np.empty(n - 1, dtype=np.float64)
    mind = dist[0].astype(np.float64, copy=True)
    mind[0] = np.inf
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    for k in range(n - 1):
        j = int(np.argmin(mind))
        lengths[k] = mind[j]
        in_tree[j] = True
        mind[j] = np.inf
        np.minimum(mind, np.where(in_tree, np.inf, dist[j]), out=mind)
    return lengths


if HAS_NUMBA:

    @njit(cache=True)
    def _prim_numba(dist):
        n = dist.shape[0]
        lengths = np.empty(n - 1, dtype=np.float64)
        mind = np.empty(n, dtype=np.float64)
        in_tree = np.zeros(n, dtype=np.bool_)
        for j in range(n):
            mind[j] = dist[0, j]
        mind[0] = np.inf
        in_tree[0] = True
        for k in range(n - 1):
            best = -1
            best_val = np.inf
            for j in range(n):
                if not in_tree[j] and mind[j] < best_val:
                    best = j
                    best_val = mind[j]
            lengths[k] = best_val
            in_tree[best] = True
            mind[best] = np.inf
            for j in range(n):
                if not in_tree[j] and dist[best, j] < mind[j]:
                    mind[j] = dist[best, j]
        return lengths

    def prim_mst_lengths_numba(dist):
        dist = np.ascontiguousarray(dist, dtype=np.float64)
        if dist.shape[0] < 2:
            return np.empty(0, dtype=np.float64)
        return _prim_numba(dist)

else:
    prim_mst_lengths_numba = None


# ---------------------------------------------------------------------------
# Pairwise Minkowski-type distances between rows of a loss matrix.
# Entry (i, j) = (sum_k |L[i,k]-L[j,k]|^p / m)^(1/p). Upper triangle only;
# the caller mirrors it.
# ---------------------------------------------------------------------------

def minkowski_rows_numpy(mat, p, row_block=None):
    t, m = mat.shape
    if row_block is None:
        # keep the (block, t, m) temporary near 256 MB
        row_block = max(1, int(256e6 / (t * m * 8)))
    out = np.zeros((t, t), dtype=np.float64)
    for i0 in range(0, t, row_block):
        i1 = min(i0 + row_block, t)
        diff = np.abs(mat[i0:i1, None, :] - mat[None, i0:, :])
        if p == 1.0:
            acc = diff.sum(axis=2)
        elif p == 2.0:
            acc = np.einsum("ijk,ijk->ij", diff, diff)
        else:
            acc = (diff ** p).sum(axis=2)
        out[i0:i1, i0:] = acc
    out /= m
    if p != 1.0:
        np.power(out, 1.0 / p, out=out)
    out = np.triu(out, 1)
    return out


if HAS_NUMBA:

    @njit(cache=True, parallel=True)
    def _minkowski_numba(mat, p):
        t, m = mat.shape
        out = np.zeros((t, t), dtype=np.float64)
        inv_m = 1.0 / m
        inv_p = 1.0 / p
        for i in prange(t):
            for j in range(i + 1, t):
                acc = 0.0
                if p == 1.0:
                    for k in range(m):
                        acc += abs(mat[i, k] - mat[j, k])
                    out[i, j] = acc * inv_m
                elif p == 2.0:
                    for k in range(m):
                        d = mat[i, k] - mat[j, k]
                        acc += d * d
                    out[i, j] = (acc * inv_m) ** 0.5
                else:
                    for k in range(m):
                        acc += abs(mat[i, k] - mat[j, k]) ** p
                    out[i, j] = (acc * inv_m) ** inv_p
        return out

    def minkowski_rows_numba(mat, p):
        return _minkowski_numba(np.ascontiguousarray(mat, dtype=np.float64), float(p))

else:
    minkowski_rows_numba = None


# --- dispatch -------------------------------------------------------------

def prim_mst_lengths(dist):
    if HAS_NUMBA:
        return prim_mst_lengths_numba(dist)
    return prim_mst_lengths_numpy(dist)


def minkowski_rows(mat, p):
    if HAS_NUMBA:
        return minkowski_rows_numba(mat, p)
    return minkowski_rows_numpy(mat, p)


def warmup():
    """Trigger JIT compilation on tiny inputs so later calls run at full speed."""
    if not HAS_NUMBA:
        return
    d = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    prim_mst_lengths_numba(d)
    minkowski_rows_numba(np.array([[0.1, 0.2], [0.3, 0.4]]), 1.0)
    minkowski_rows_numba(np.array([[0.1, 0.2], [0.3, 0.4]]), 2.0)
    minkowski_rows_numba(np.array([[0.1, 0.2], [0.3, 0.4]]), 3.0)
