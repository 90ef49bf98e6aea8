"""Benchmark the scoring kernels: numba-jitted vs pure-numpy fallback.

Run: python bench/bench_kernels.py --keys 7000 --dim 64 --requests 200
(set MUSICDR_NO_NUMBA=1 to confirm the fallback path is the one timed as
"numpy" here regardless of environment).
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from musicdr import kernels


def _time(func, *args, repeats: int) -> float:
    func(*args)  # warm up (numba compiles on first call)
    start = time.perf_counter()
    for _ in range(repeats):
        func(*args)
    return (time.perf_counter() - start) / repeats * 1000.0


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--keys", type=int, default=7000)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--requests", type=int, default=200)
    parser.add_argument("--nnz-per-row", type=int, default=8)
    parser.add_argument("--vocab", type=int, default=5000)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    rows = rng.standard_normal((args.keys, args.dim)).astype(np.float32)
    query = rng.standard_normal(args.dim)
    queries = rng.standard_normal((args.requests, args.dim))

    indptr = np.arange(0, (args.keys + 1) * args.nnz_per_row, args.nnz_per_row, dtype=np.int64)
    indices = rng.integers(0, args.vocab, size=args.keys * args.nnz_per_row, dtype=np.int64)
    for row in range(args.keys):  # CSR columns must be sorted within a row
        lo, hi = indptr[row], indptr[row + 1]
        indices[lo:hi] = np.sort(indices[lo:hi])
    data = rng.random(args.keys * args.nnz_per_row)
    dense_query = np.zeros(args.vocab)
    dense_query[rng.integers(0, args.vocab, size=64)] = rng.random(64)

    print(f"numba available and enabled: {kernels.numba_enabled()}")
    print(f"{args.keys} keys, dim {args.dim}, {args.requests} requests, {args.repeats} repeats")
    print()
    print(f"{'kernel':<22} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8}")

    rows_np = [
        ("dense_scores", kernels.dense_scores_numpy, (rows, query)),
        ("dense_scores_batch", kernels.dense_scores_batch_numpy, (rows, queries)),
        ("sparse_scores", kernels.sparse_scores_numpy, (indptr, indices, data, dense_query)),
    ]
    jitted = {
        "dense_scores": getattr(kernels, "_dense_scores_jit", None),
        "dense_scores_batch": getattr(kernels, "_dense_scores_batch_jit", None),
        "sparse_scores": getattr(kernels, "_sparse_scores_jit", None),
    }
    for name, numpy_func, call_args in rows_np:
        t_numpy = _time(numpy_func, *call_args, repeats=args.repeats)
        jit_func = jitted[name]
        if jit_func is None:
            print(f"{name:<22} {t_numpy:>10.3f} {'n/a':>10} {'n/a':>8}")
            continue
        t_numba = _time(jit_func, *call_args, repeats=args.repeats)
        print(f"{name:<22} {t_numpy:>10.3f} {t_numba:>10.3f} {t_numpy / t_numba:>7.2f}x")


if __name__ == "__main__":
    main()
