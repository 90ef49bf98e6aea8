"""Hot scoring kernels: numba-jitted with a pure-numpy fallback.

Exhaustive dot-product scoring of one request against every indexed key is
where evaluation time goes (thousands of requests x thousands of keys), so
the inner loops live here. Setting MUSICDR_NO_NUMBA=1 selects the numpy
path; the same path is used automatically when numba is not installed.
Both paths share dtype contracts: float32 row storage, float64 scores.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    _HAS_NUMBA = True
except ImportError:
    numba = None
    _HAS_NUMBA = False

_USE_NUMBA = _HAS_NUMBA and os.environ.get("MUSICDR_NO_NUMBA", "") not in ("1", "true", "yes")


def numba_enabled() -> bool:
    """True when the jitted kernels are active for this process."""
    return _USE_NUMBA


def dense_scores_numpy(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    return rows.astype(np.float64) @ query


def dense_scores_batch_numpy(rows: np.ndarray, queries: np.ndarray) -> np.ndarray:
    return queries @ rows.astype(np.float64).T


def sparse_scores_numpy(
    indptr: np.ndarray, indices: np.ndarray, data: np.ndarray, query_dense: np.ndarray
) -> np.ndarray:
    n_rows = indptr.shape[0] - 1
    scores = np.zeros(n_rows, dtype=np.float64)
    counts = np.diff(indptr)
    row_ids = np.repeat(np.arange(n_rows), counts)
    np.add.at(scores, row_ids, data * query_dense[indices])
    return scores


def sparse_dot_numpy(
    indices_a: np.ndarray, values_a: np.ndarray, indices_b: np.ndarray, values_b: np.ndarray
) -> float:
    _, ia, ib = np.intersect1d(indices_a, indices_b, assume_unique=True, return_indices=True)
    if ia.size == 0:
        return 0.0
    return float(np.sum(values_a[ia] * values_b[ib]))


if _HAS_NUMBA:

    @numba.njit(cache=True)
    def _dense_scores_jit(rows, query):
        n, dim = rows.shape
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            acc = 0.0
            for j in range(dim):
                acc += rows[i, j] * query[j]
            out[i] = acc
        return out

    @numba.njit(cache=True, parallel=True)
    def _dense_scores_batch_jit(rows, queries):
        n, dim = rows.shape
        m = queries.shape[0]
        out = np.empty((m, n), dtype=np.float64)
        for q in numba.prange(m):
            for i in range(n):
                acc = 0.0
                for j in range(dim):
                    acc += rows[i, j] * queries[q, j]
                out[q, i] = acc
        return out

    @numba.njit(cache=True)
    def _sparse_scores_jit(indptr, indices, data, query_dense):
        n_rows = indptr.shape[0] - 1
        out = np.zeros(n_rows, dtype=np.float64)
        for row in range(n_rows):
            acc = 0.0
            for j in range(indptr[row], indptr[row + 1]):
                acc += data[j] * query_dense[indices[j]]
            out[row] = acc
        return out

    @numba.njit(cache=True)
    def _sparse_dot_jit(indices_a, values_a, indices_b, values_b):
        i = 0
        j = 0
        acc = 0.0
        while i < indices_a.shape[0] and j < indices_b.shape[0]:
            ia = indices_a[i]
            ib = indices_b[j]
            if ia == ib:
                acc += values_a[i] * values_b[j]
                i += 1
                j += 1
            elif ia < ib:
                i += 1
            else:
                j += 1
        return acc


def dense_scores(rows: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Score one float64 query against float32 rows; float64 result."""
    if _USE_NUMBA:
        return _dense_scores_jit(np.ascontiguousarray(rows), np.ascontiguousarray(query))
    return dense_scores_numpy(rows, query)


def dense_scores_batch(rows: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Score a (m, dim) query batch against (n, dim) rows; (m, n) result.

    Always the numpy path: batched dense scoring is a matmul, and BLAS
    beats a jitted loop by an order of magnitude there (see the kernel
    benchmark). The jitted variant stays available for comparison.
    """
    return dense_scores_batch_numpy(rows, queries)


def sparse_scores(
    indptr: np.ndarray, indices: np.ndarray, data: np.ndarray, query_dense: np.ndarray
) -> np.ndarray:
    """Score a dense query vector against CSR-stored sparse rows."""
    if _USE_NUMBA:
        return _sparse_scores_jit(indptr, indices, data, query_dense)
    return sparse_scores_numpy(indptr, indices, data, query_dense)


def sparse_dot(
    indices_a: np.ndarray, values_a: np.ndarray, indices_b: np.ndarray, values_b: np.ndarray
) -> float:
    """Dot product of two sparse vectors given as sorted (indices, values)."""
    if _USE_NUMBA:
        return float(_sparse_dot_jit(indices_a, values_a, indices_b, values_b))
    return sparse_dot_numpy(indices_a, values_a, indices_b, values_b)


def top_k_descending(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest scores, ties broken by ascending index.

    Stays in numpy on both paths: the tie rule needs a stable sort, and
    sorting a few thousand scores is nowhere near the hot loop.
    """
    order = np.argsort(-scores, kind="stable")
    return order[: min(k, scores.shape[0])]
