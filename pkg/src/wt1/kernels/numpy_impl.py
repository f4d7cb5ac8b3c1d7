"""Pure-numpy reference implementations of the mod-q matrix kernels.

Entries live in int64 arrays reduced to [0, q).  Every product of two
reduced entries fits in int64 because the modulus is kept below 2**31,
and elementwise products are reduced before they are summed.
"""

from __future__ import annotations

import numpy as np


def inv_mod(a: int, q: int) -> int:
    return pow(int(a) % q, q - 2, q)


def matmul_mod(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError("inner dimensions differ")
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.int64)
    # One row of a at a time keeps the intermediate below rows*q**2.
    for i in range(a.shape[0]):
        out[i, :] = ((a[i, :, None] * b) % q).sum(axis=0) % q
    return out


def rref_mod(a: np.ndarray, q: int):
    """Row-reduce a copy of `a` mod q.

    Returns (r, pivots, rank) where r is the reduced matrix, pivots the
    pivot column index per nonzero row.  The pivot row for each column is
    the first row, scanning downward, with a nonzero entry; this makes the
    reduction deterministic for a given input.
    """
    r = (a.astype(np.int64) % q).copy()
    nrows, ncols = r.shape
    pivots = np.empty(min(nrows, ncols), dtype=np.int64)
    rank = 0
    for col in range(ncols):
        if rank == nrows:
            break
        sub = r[rank:, col]
        nz = np.nonzero(sub)[0]
        if nz.size == 0:
            continue
        piv = rank + int(nz[0])
        if piv != rank:
            r[[rank, piv], :] = r[[piv, rank], :]
        inv = pow(int(r[rank, col]), q - 2, q)
        r[rank, :] = (r[rank, :] * inv) % q
        mask = np.nonzero(r[:, col])[0]
        mask = mask[mask != rank]
        if mask.size:
            r[mask, :] = (r[mask, :] - r[mask, col][:, None] * r[rank, :]) % q
        pivots[rank] = col
        rank += 1
    return r, pivots[:rank].copy(), rank


def rank_mod(a: np.ndarray, q: int) -> int:
    return rref_mod(a, q)[2]


def nullspace_mod(a: np.ndarray, q: int) -> np.ndarray:
    """Columns form a basis of the right kernel of `a` mod q."""
    r, pivots, rank = rref_mod(a, q)
    ncols = a.shape[1]
    free = [c for c in range(ncols) if c not in set(int(p) for p in pivots)]
    basis = np.zeros((ncols, len(free)), dtype=np.int64)
    for j, fc in enumerate(free):
        basis[fc, j] = 1
        for i in range(rank):
            basis[int(pivots[i]), j] = (-int(r[i, fc])) % q
    return basis


def reduce_vector_mod(r: np.ndarray, pivots: np.ndarray, v: np.ndarray, q: int) -> np.ndarray:
    """Subtract the projection of v onto the row space of the rref rows."""
    out = (v.astype(np.int64) % q).copy()
    for i in range(pivots.shape[0]):
        c = out[int(pivots[i])]
        if c:
            out = (out - c * r[i, :]) % q
    return out


def divide_series_mod(f: np.ndarray, e: np.ndarray, q: int, out_len: int) -> np.ndarray:
    """Forward-substitute f = g * e for g, with e[0] invertible mod q.

    Both inputs are coefficient arrays starting at their first retained
    index; out_len entries of g are produced.
    """
    inv0 = pow(int(e[0]), q - 2, q)
    g = np.zeros(out_len, dtype=np.int64)
    for n in range(out_len):
        acc = int(f[n])
        for k in range(1, n + 1):
            acc -= int(g[n - k]) * int(e[k]) % q
        g[n] = acc % q * inv0 % q
    return g


def hecke_series_mod(cols: np.ndarray, p: int, scale: int, q: int,
                     first_index: int = 1) -> np.ndarray:
    """Apply the index-p Hecke operator columnwise.

    Row r of `cols` holds coefficient a_{first_index + r}.  Output row for
    index n gets a_{np} + scale * a_{n/p}, the second term only when p
    divides n (n = 0 counts as divisible).  Input precision m becomes
    output precision m // p, so with first_index=1 there are m // p rows
    and with first_index=0 there are m // p + 1.
    """
    m = cols.shape[0] - 1 + first_index
    out_rows = m // p + 1 - first_index
    out = np.zeros((out_rows, cols.shape[1]), dtype=np.int64)
    scale = scale % q
    for n in range(first_index, m // p + 1):
        row = cols[n * p - first_index, :].copy()
        if n % p == 0:
            row = row + scale * cols[n // p - first_index, :] % q
        out[n - first_index, :] = row % q
    return out
