"""Numba-compiled mod-q matrix kernels.

Same contracts as numpy_impl; loops are explicit so numba can lower them
to machine code.  Accumulators reduce after every multiply-add, keeping
magnitudes below q**2 + q, which fits int64 for q < 2**31.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _pow_mod(base: np.int64, exp: np.int64, q: np.int64) -> np.int64:
    result = np.int64(1)
    b = base % q
    e = exp
    while e > 0:
        if e & 1:
            result = result * b % q
        b = b * b % q
        e >>= 1
    return result


def inv_mod(a: int, q: int) -> int:
    return int(_pow_mod(np.int64(a % q), np.int64(q - 2), np.int64(q)))


@njit(cache=True)
def _matmul_mod(a, b, q):
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m), dtype=np.int64)
    for i in range(n):
        for j in range(m):
            acc = np.int64(0)
            for t in range(k):
                acc = (acc + a[i, t] * b[t, j]) % q
            out[i, j] = acc
    return out


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError("inner dimensions differ")
    return _matmul_mod(np.ascontiguousarray(a, dtype=np.int64),
                       np.ascontiguousarray(b, dtype=np.int64), np.int64(q))


@njit(cache=True)
def _rref_mod(r, q):
    nrows, ncols = r.shape
    cap = min(nrows, ncols)
    pivots = np.empty(cap, dtype=np.int64)
    rank = 0
    for col in range(ncols):
        if rank == nrows:
            break
        piv = -1
        for i in range(rank, nrows):
            if r[i, col] != 0:
                piv = i
                break
        if piv < 0:
            continue
        if piv != rank:
            for j in range(ncols):
                tmp = r[rank, j]
                r[rank, j] = r[piv, j]
                r[piv, j] = tmp
        inv = _pow_mod(r[rank, col], q - 2, q)
        for j in range(ncols):
            r[rank, j] = r[rank, j] * inv % q
        for i in range(nrows):
            if i != rank and r[i, col] != 0:
                factor = r[i, col]
                for j in range(ncols):
                    r[i, j] = (r[i, j] - factor * r[rank, j]) % q
        pivots[rank] = col
        rank += 1
    return r, pivots[:rank].copy(), rank


def rref_mod(a: np.ndarray, q: int):
    r = np.ascontiguousarray(a, dtype=np.int64) % q
    return _rref_mod(r.copy(), np.int64(q))


def rank_mod(a: np.ndarray, q: int) -> int:
    return rref_mod(a, q)[2]


@njit(cache=True)
def _nullspace_mod(r, pivots, rank, ncols, q):
    is_pivot = np.zeros(ncols, dtype=np.int64)
    for i in range(rank):
        is_pivot[pivots[i]] = 1
    nfree = ncols - rank
    basis = np.zeros((ncols, nfree), dtype=np.int64)
    j = 0
    for fc in range(ncols):
        if is_pivot[fc]:
            continue
        basis[fc, j] = 1
        for i in range(rank):
            basis[pivots[i], j] = (-r[i, fc]) % q
        j += 1
    return basis


def nullspace_mod(a: np.ndarray, q: int) -> np.ndarray:
    r, pivots, rank = rref_mod(a, q)
    return _nullspace_mod(r, pivots, rank, a.shape[1], np.int64(q))


@njit(cache=True)
def _reduce_vector_mod(r, pivots, v, q):
    out = v % q
    for i in range(pivots.shape[0]):
        c = out[pivots[i]]
        if c != 0:
            for j in range(out.shape[0]):
                out[j] = (out[j] - c * r[i, j]) % q
    return out


def reduce_vector_mod(r: np.ndarray, pivots: np.ndarray, v: np.ndarray, q: int) -> np.ndarray:
    vv = np.ascontiguousarray(v, dtype=np.int64).copy()
    return _reduce_vector_mod(np.ascontiguousarray(r), np.ascontiguousarray(pivots), vv, np.int64(q))


@njit(cache=True)
def _divide_series_mod(f, e, q, out_len):
    inv0 = _pow_mod(e[0], q - 2, q)
    g = np.zeros(out_len, dtype=np.int64)
    for n in range(out_len):
        acc = f[n] % q
        for k in range(1, n + 1):
            acc = (acc - g[n - k] * e[k]) % q
        g[n] = acc * inv0 % q
    return g


def divide_series_mod(f: np.ndarray, e: np.ndarray, q: int, out_len: int) -> np.ndarray:
    return _divide_series_mod(np.ascontiguousarray(f, dtype=np.int64),
                              np.ascontiguousarray(e, dtype=np.int64),
                              np.int64(q), out_len)


@njit(cache=True)
def _hecke_series_mod(cols, p, scale, q, first_index):
    w = cols.shape[1]
    m = cols.shape[0] - 1 + first_index
    out_rows = m // p + 1 - first_index
    out = np.zeros((out_rows, w), dtype=np.int64)
    for n in range(first_index, m // p + 1):
        for j in range(w):
            acc = cols[n * p - first_index, j]
            if n % p == 0:
                acc = (acc + scale * cols[n // p - first_index, j]) % q
            out[n - first_index, j] = acc % q
    return out


def hecke_series_mod(cols: np.ndarray, p: int, scale: int, q: int,
                     first_index: int = 1) -> np.ndarray:
    return _hecke_series_mod(np.ascontiguousarray(cols, dtype=np.int64),
                             np.int64(p), np.int64(scale % q), np.int64(q),
                             np.int64(first_index))
