"""Exact linear algebra over a prime residue field, plus q-expansion plumbing.

Matrices are dense int64 numpy arrays with entries reduced mod a word-sized
prime q; the row-reduction and series kernels come from `wt1.kernels`, which
dispatches to a compiled numba build or a pure-numpy fallback.  On top of the
matrix layer sit the q-expansion operations used by the stabilisation pipeline:
series division with a controlled precision loss, Hecke operators with the
strict floor(m/p) output precision, the stable-subspace fixpoint, and the
simultaneous diagonalisation that splits a stabilised space into Hecke
eigenvectors while quotienting away a designated old subspace.

Everything here is deterministic: pivoting always picks the first nonzero
candidate, and the random Hecke combinations in `diagonalise_new` come from a
generator seeded by (level, Conrey index, attempt).
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .arithmetic import is_prime
from .characters import DirichletCharacter
from .cyclotomic import CyclotomicInteger, ModularProjection
from .kernels import (
    divide_series_mod,
    hecke_series_mod,
    matmul_mod,
    nullspace_mod,
    reduce_vector_mod,
    rref_mod,
)

logger = logging.getLogger(__name__)

Coeff = Union[int, Fraction, CyclotomicInteger]


# ---------------------------------------------------------------------------
# matrices


@dataclass
class FqMatrix:
    """Dense matrix over F_q.  Entries are kept reduced to [0, q)."""

    q: int
    entries: np.ndarray

    def __post_init__(self):
        if not (2 <= self.q < (1 << 31) and is_prime(self.q)):
            raise ValueError("modulus must be a prime below 2**31")
        a = np.asarray(self.entries, dtype=np.int64)
        if a.ndim != 2:
            raise ValueError("entries must be a 2-d array")
        self.entries = a % self.q

    @classmethod
    def from_columns(cls, q: int, cols: Sequence[Sequence[int]]) -> "FqMatrix":
        if not cols:
            return cls(q, np.zeros((0, 0), dtype=np.int64))
        return cls(q, np.array(cols, dtype=np.int64).T)

    @classmethod
    def zeros(cls, q: int, nrows: int, ncols: int) -> "FqMatrix":
        return cls(q, np.zeros((nrows, ncols), dtype=np.int64))

    @classmethod
    def identity(cls, q: int, n: int) -> "FqMatrix":
        return cls(q, np.eye(n, dtype=np.int64))

    @property
    def nrows(self) -> int:
        return self.entries.shape[0]

    @property
    def ncols(self) -> int:
        return self.entries.shape[1]

    def column(self, j: int) -> np.ndarray:
        return self.entries[:, j].copy()

    def take_rows(self, n: int) -> "FqMatrix":
        return FqMatrix(self.q, self.entries[:n, :].copy())

    def hstack(self, other: "FqMatrix") -> "FqMatrix":
        if other.q != self.q or other.nrows != self.nrows:
            raise ValueError("shape or modulus mismatch")
        return FqMatrix(self.q, np.hstack([self.entries, other.entries]))

    def __eq__(self, other) -> bool:
        return (isinstance(other, FqMatrix) and self.q == other.q
                and self.entries.shape == other.entries.shape
                and bool((self.entries == other.entries).all()))


def rref(mat: FqMatrix) -> Tuple[FqMatrix, Tuple[int, ...]]:
    r, pivots, _ = rref_mod(mat.entries, mat.q)
    return FqMatrix(mat.q, r), tuple(int(p) for p in pivots)


def rank(mat: FqMatrix) -> int:
    return rref_mod(mat.entries, mat.q)[2]


def kernel(mat: FqMatrix) -> FqMatrix:
    """Basis of the right null space, one basis vector per column."""
    return FqMatrix(mat.q, nullspace_mod(mat.entries, mat.q))


def matmul(a: FqMatrix, b: FqMatrix) -> FqMatrix:
    if a.q != b.q:
        raise ValueError("modulus mismatch")
    return FqMatrix(a.q, matmul_mod(a.entries, b.entries, a.q))


def solve_matrix(a: FqMatrix, rhs: FqMatrix) -> Optional[FqMatrix]:
    """Solve a X = rhs columnwise; None when any column is inconsistent.

    Free variables are set to zero, so the solution is deterministic.
    """
    if a.nrows != rhs.nrows:
        raise ValueError("row counts differ")
    q = a.q
    aug = np.hstack([a.entries, rhs.entries])
    r, pivots, rk = rref_mod(aug, q)
    na = a.ncols
    for p in pivots:
        if p >= na:
            return None
    x = np.zeros((na, rhs.ncols), dtype=np.int64)
    for i in range(rk):
        x[int(pivots[i]), :] = r[i, na:]
    return FqMatrix(q, x)


def column_space_basis(mat: FqMatrix) -> FqMatrix:
    """Canonical basis of the column space (columns of the result).

    Row-reducing the transpose gives a basis that depends only on the
    span, which makes span comparisons a plain matrix equality.
    """
    r, _, rk = rref_mod(mat.entries.T.copy(), mat.q)
    return FqMatrix(mat.q, r[:rk, :].T.copy())


def in_column_space(mat: FqMatrix, vec: np.ndarray) -> bool:
    r, pivots, _ = rref_mod(mat.entries.T.copy(), mat.q)
    res = reduce_vector_mod(r, pivots, np.asarray(vec, dtype=np.int64), mat.q)
    return not res.any()


def column_space_intersection(*mats: FqMatrix) -> FqMatrix:
    """Intersection of column spaces, via the kernel of the stacked matrix.

    For two spaces with bases A and B the vectors Ax with [A | -B](x, y) = 0
    run over the intersection; more factors fold in one at a time.
    """
    if not mats:
        raise ValueError("need at least one space")
    q = mats[0].q
    acc = mats[0]
    for b in mats[1:]:
        if b.q != q or b.nrows != acc.nrows:
            raise ValueError("shape or modulus mismatch")
        if acc.ncols == 0 or b.ncols == 0:
            return FqMatrix.zeros(q, acc.nrows, 0)
        stacked = np.hstack([acc.entries, (-b.entries) % q])
        ker = nullspace_mod(stacked, q)
        x = ker[: acc.ncols, :]
        acc = column_space_basis(FqMatrix(q, matmul_mod(acc.entries, x, q)))
    return acc


# ---------------------------------------------------------------------------
# q-expansions


@dataclass
class QExpansion:
    """Truncated q-expansion a_0 .. a_precision.

    `domain` is "cyclotomic" for exact coefficients (integers, Fractions or
    CyclotomicInteger values) and "residue" for images in F_modulus.  The
    character is carried along so Hecke operators can be applied; it may be
    None for series that are not eigenvector candidates of anything.
    """

    weight: int
    level: int
    character: Optional[DirichletCharacter]
    domain: str
    coeffs: List[Coeff]
    precision: int
    modulus: Optional[int] = None

    def __post_init__(self):
        if self.domain not in ("cyclotomic", "residue"):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.domain == "residue":
            if self.modulus is None:
                raise ValueError("residue domain needs a modulus")
            reduced = []
            for c in self.coeffs:
                ci = int(c)
                if ci != c:
                    raise ValueError("residue coefficients must be integers")
                reduced.append(ci % self.modulus)
            self.coeffs = reduced
        if len(self.coeffs) != self.precision + 1:
            raise ValueError("coefficient count does not match precision")

    def coeff(self, n: int) -> Coeff:
        if not 0 <= n <= self.precision:
            raise IndexError(f"coefficient {n} beyond precision {self.precision}")
        return self.coeffs[n]

    def vector(self, first_index: int = 0) -> np.ndarray:
        if self.domain != "residue":
            raise ValueError("only residue-domain series vectorise")
        return np.array(self.coeffs[first_index:], dtype=np.int64)


def project_expansion(f: QExpansion, proj: ModularProjection) -> QExpansion:
    """Push an exact series into F_q through a root-of-unity projection."""
    if f.domain != "cyclotomic":
        raise ValueError("series is already in a residue field")
    q = proj.q
    out: List[int] = []
    for c in f.coeffs:
        if isinstance(c, CyclotomicInteger):
            out.append(proj.project(c))
        elif isinstance(c, Fraction):
            out.append(c.numerator * pow(c.denominator, q - 2, q) % q)
        else:
            out.append(int(c) % q)
    return QExpansion(f.weight, f.level, f.character, "residue", out,
                      f.precision, modulus=q)


def _chi_residue(chi: Optional[DirichletCharacter], n: int,
                 proj: ModularProjection) -> int:
    if chi is None:
        return 1 % proj.q
    e = chi.value_exponent(n, proj.H)
    return 0 if e is None else proj.zeta_power(e)


def _chi_exact(chi: Optional[DirichletCharacter], n: int) -> CyclotomicInteger:
    if chi is None:
        return CyclotomicInteger.from_int(1, 1)
    val = chi.evaluate(n)
    if val is None:
        return CyclotomicInteger.from_int(1, 0)
    j, r = val
    return CyclotomicInteger.zeta_power(r, j)


def divide_series(f: QExpansion, e: QExpansion) -> QExpansion:
    """Forward-substitute the quotient f / e of residue-domain series.

    The divisor must have valuation 0 or 1; the quotient is returned to
    precision m - v where m is the common precision and v the valuation.
    A zero leading coefficient in both positions is an error rather than a
    silent precision drop.
    """
    if f.domain != "residue" or e.domain != "residue" or f.modulus != e.modulus:
        raise ValueError("division works on residue series over one field")
    q = f.modulus
    m = min(f.precision, e.precision)
    if e.coeffs[0] % q:
        v = 0
    elif e.precision >= 1 and e.coeffs[1] % q:
        v = 1
    else:
        raise ZeroDivisionError("divisor has no invertible leading coefficient")
    if any(c % q for c in f.coeffs[:v]):
        raise ValueError("dividend valuation is smaller than the divisor's")
    fa = np.array(f.coeffs[v:m + 1], dtype=np.int64)
    ea = np.array(e.coeffs[v:m + 1], dtype=np.int64)
    out = divide_series_mod(fa, ea, q, m - v + 1)
    char = None
    if f.character is not None and e.character is not None:
        char = f.character * e.character.conjugate()
    return QExpansion(f.weight - e.weight, f.level, char, "residue",
                      [int(c) for c in out], m - v, modulus=q)


def hecke_apply(f: QExpansion, p: int,
                proj: Optional[ModularProjection] = None) -> QExpansion:
    """Index-p Hecke operator: (T_p f)_n = a_{np} + chi(p) p^{k-1} a_{n/p}.

    The second term appears only when p | n, with n = 0 counting as
    divisible.  Output precision is exactly floor(m / p): coefficients the
    input cannot determine are never fabricated.
    """
    if not is_prime(p):
        raise ValueError("Hecke index must be prime here")
    m = f.precision
    out_prec = m // p
    if f.domain == "residue":
        if proj is None:
            raise ValueError("residue-domain Hecke action needs the projection")
        q = f.modulus
        scale = _chi_residue(f.character, p, proj) * pow(p, f.weight - 1, q) % q
        arr = np.array(f.coeffs, dtype=np.int64)
        out = hecke_series_mod(arr.reshape(-1, 1), p, scale, q, first_index=0)
        coeffs: List[Coeff] = [int(c) for c in out[:, 0]]
    else:
        chi_p = _chi_exact(f.character, p) * (p ** (f.weight - 1))
        coeffs = []
        for n in range(out_prec + 1):
            term = _as_cyclo(f.coeffs[n * p])
            if n % p == 0:
                term = term + chi_p * _as_cyclo(f.coeffs[n // p])
            coeffs.append(term)
    return QExpansion(f.weight, f.level, f.character, f.domain, coeffs,
                      out_prec, modulus=f.modulus)


def _as_cyclo(c: Coeff) -> CyclotomicInteger:
    if isinstance(c, CyclotomicInteger):
        return c
    if isinstance(c, Fraction):
        if c.denominator != 1:
            raise ValueError("non-integral coefficient in exact Hecke action")
        return CyclotomicInteger.from_int(1, c.numerator)
    return CyclotomicInteger.from_int(1, int(c))


# ---------------------------------------------------------------------------
# characteristic polynomials and univariate helpers over F_q

# Polynomials are coefficient lists, lowest degree first, entries in [0, q).


def _poly_trim(a: List[int]) -> List[int]:
    while len(a) > 1 and a[-1] == 0:
        a.pop()
    return a


def poly_mul(a: Sequence[int], b: Sequence[int], q: int) -> List[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                if y:
                    out[i + j] = (out[i + j] + x * y) % q
    return _poly_trim(out)


def _poly_divmod(a: Sequence[int], b: Sequence[int], q: int) -> Tuple[List[int], List[int]]:
    b = _poly_trim(list(b))
    if b == [0]:
        raise ZeroDivisionError("polynomial division by zero")
    inv_lead = pow(b[-1], q - 2, q)
    rem = [x % q for x in a]
    db = len(b) - 1
    quo = [0] * max(1, len(rem) - db)
    while len(_poly_trim(rem)) - 1 >= db and _poly_trim(rem) != [0]:
        rem = _poly_trim(rem)
        shift = len(rem) - 1 - db
        c = rem[-1] * inv_lead % q
        quo[shift] = c
        for i, y in enumerate(b):
            rem[shift + i] = (rem[shift + i] - c * y) % q
    return _poly_trim(quo), _poly_trim(rem)


def poly_mod(a: Sequence[int], b: Sequence[int], q: int) -> List[int]:
    return _poly_divmod(a, b, q)[1]


def poly_gcd(a: Sequence[int], b: Sequence[int], q: int) -> List[int]:
    """Monic gcd by the Euclidean algorithm."""
    x, y = _poly_trim([c % q for c in a]), _poly_trim([c % q for c in b])
    while y != [0]:
        x, y = y, poly_mod(x, y, q)
    if x != [0]:
        inv = pow(x[-1], q - 2, q)
        x = [c * inv % q for c in x]
    return x


def poly_deriv(a: Sequence[int], q: int) -> List[int]:
    return _poly_trim([i * c % q for i, c in enumerate(a)][1:] or [0])


def poly_is_squarefree(a: Sequence[int], q: int) -> bool:
    return len(poly_gcd(a, poly_deriv(a, q), q)) == 1


def poly_powmod(base: Sequence[int], exp: int, mod: Sequence[int], q: int) -> List[int]:
    result = [1]
    acc = poly_mod(base, mod, q)
    while exp:
        if exp & 1:
            result = poly_mod(poly_mul(result, acc, q), mod, q)
        acc = poly_mod(poly_mul(acc, acc, q), mod, q)
        exp >>= 1
    return result


def poly_roots(f: Sequence[int], q: int, rng: random.Random) -> List[int]:
    """All roots in F_q, ascending.  Roots of multiplicity > 1 appear once.

    The linear-factor part is split off with gcd(x^q - x, f); repeated
    quadratic-residue splitting then isolates the roots.  The rng drives
    the splitting shifts, so a seeded generator makes this deterministic.
    """
    f = _poly_trim([c % q for c in f])
    if f == [0]:
        raise ValueError("zero polynomial")
    xq_minus_x = poly_powmod([0, 1], q, f, q)
    while len(xq_minus_x) < 2:
        xq_minus_x.append(0)
    xq_minus_x[1] = (xq_minus_x[1] - 1) % q
    lin = poly_gcd(xq_minus_x, f, q)
    roots: List[int] = []
    stack = [lin]
    while stack:
        g = stack.pop()
        deg = len(g) - 1
        if deg == 0:
            continue
        if g[0] == 0:
            roots.append(0)
            g = _poly_trim(g[1:])
            deg = len(g) - 1
            if deg == 0:
                continue
        if deg == 1:
            roots.append((-g[0]) * pow(g[1], q - 2, q) % q)
            continue
        while True:
            a = rng.randrange(q)
            h = poly_powmod([a, 1], (q - 1) // 2, g, q)
            h = _poly_trim([(c - (1 if i == 0 else 0)) % q for i, c in enumerate(h)] or [0])
            d = poly_gcd(h, g, q)
            if 0 < len(d) - 1 < deg:
                stack.append(d)
                stack.append(_poly_divmod(g, d, q)[0])
                break
    return sorted(roots)


def charpoly_mod(a: np.ndarray, q: int) -> List[int]:
    """det(xI - A) mod q via Hessenberg reduction, monic, low degree first."""
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    h = [[int(v) % q for v in row] for row in a.tolist()]
    for j in range(n - 2):
        piv = next((i for i in range(j + 1, n) if h[i][j]), None)
        if piv is None:
            continue
        if piv != j + 1:
            h[j + 1], h[piv] = h[piv], h[j + 1]
            for row in h:
                row[j + 1], row[piv] = row[piv], row[j + 1]
        inv = pow(h[j + 1][j], q - 2, q)
        for i in range(j + 2, n):
            f = h[i][j] * inv % q
            if f:
                hi, hj1 = h[i], h[j + 1]
                for t in range(n):
                    hi[t] = (hi[t] - f * hj1[t]) % q
                for row in h:
                    row[j + 1] = (row[j + 1] + f * row[i]) % q
    # p_k = (x - h[k-1][k-1]) p_{k-1} - sum over trailing subdiagonal products
    polys: List[List[int]] = [[1]]
    for k in range(1, n + 1):
        cur = poly_mul(polys[k - 1], [(-h[k - 1][k - 1]) % q, 1], q)
        prod = 1
        for i in range(k - 1, 0, -1):
            prod = prod * h[i][i - 1] % q
            if prod == 0:
                break
            coef = h[i - 1][k - 1] * prod % q
            if coef:
                scaled = [coef * c % q for c in polys[i - 1]]
                cur = [x for x in cur]
                for t, c in enumerate(scaled):
                    cur[t] = (cur[t] - c) % q
        polys.append(_poly_trim(cur))
    return polys[n]


# ---------------------------------------------------------------------------
# stabilisation primitives


def stable_subspace(space: FqMatrix, p: int, scale: int, rank_prefix: int,
                    first_index: int = 0) -> FqMatrix:
    """Largest chain V ⊇ T_p-stable subspace reachable by the fixpoint
    V_{i+1} = {v in V_i : T_p v in span(V_i)}.

    Membership is decided on the first `rank_prefix` output rows, which the
    caller must know to be rank-faithful for the ambient space.  Columns of
    the result are combinations of the input columns; when the input is
    already stable it is returned unchanged, which makes the map idempotent.
    """
    m = space.nrows - 1 + first_index
    if rank_prefix > m // p + 1 - first_index:
        raise ValueError("rank prefix exceeds the Hecke output precision")
    q = space.q
    cur = space
    while cur.ncols:
        image = hecke_series_mod(cur.entries, p, scale, q, first_index=first_index)
        image_pref = image[:rank_prefix, :]
        span_pref = cur.entries[:rank_prefix, :]
        r, pivots, _ = rref_mod(span_pref.T.copy(), q)
        resid = np.stack([
            reduce_vector_mod(r, pivots, image_pref[:, j], q)
            for j in range(image_pref.shape[1])
        ], axis=1)
        if not resid.any():
            return cur
        combos = nullspace_mod(resid, q)
        cur = FqMatrix(q, matmul_mod(cur.entries, combos, q))
    return cur


@dataclass
class Eigenvector:
    """One Hecke eigenvector produced by `diagonalise_new`.

    `series` holds residue coefficients with the same first_index as the
    input matrix and a_1 normalised to 1; `eigenvalue` is its eigenvalue
    under the random Hecke combination that split the space.
    """

    series: np.ndarray
    eigenvalue: int
    combo: Tuple[Tuple[int, int], ...] = field(default=())


def diagonalise_new(space: FqMatrix, old: FqMatrix, level: int, conrey: int,
                    hecke_ops: Sequence[Tuple[int, int]], rank_prefix: int,
                    first_index: int = 0, max_attempts: int = 24) -> List[Eigenvector]:
    """Split a Hecke-stable space into eigenvectors away from `old`.

    A change of basis puts a basis of the old subspace first, so every
    Hecke combination acts block-triangularly.  Combinations A = sum of
    c_j T_{p_j} are drawn from a generator seeded by (level, conrey,
    attempt) until the new block's characteristic polynomial is squarefree
    and coprime to the old block's; eigenvectors are then returned for its
    roots in F_q only, since irreducible factors of higher degree cannot
    support an eigenvector over the residue field.  Raises ArithmeticError
    when no attempt within the budget separates the blocks.
    """
    q = space.q
    if old.q != q or old.nrows != space.nrows:
        raise ValueError("old subspace lives in a different ambient space")
    if space.ncols == 0 and old.ncols == 0:
        return []
    for p, _ in hecke_ops:
        m = space.nrows - 1 + first_index
        if rank_prefix > m // p + 1 - first_index:
            raise ValueError(f"rank prefix exceeds T_{p} output precision")

    # Basis with the old space in front, completed greedily from `space`.
    basis_cols: List[np.ndarray] = []
    pref_rows: List[np.ndarray] = []
    rank_now = 0
    for src in (old, space):
        for j in range(src.ncols):
            cand = src.entries[:, j]
            trial = np.stack(pref_rows + [cand[:rank_prefix]], axis=0)
            rk = rref_mod(trial, q)[2]
            if rk > rank_now:
                basis_cols.append(cand.copy())
                pref_rows.append(cand[:rank_prefix].copy())
                rank_now = rk
            elif src is old:
                raise ValueError("old subspace columns are dependent")
    k_old = old.ncols
    k = len(basis_cols)
    basis = FqMatrix(q, np.stack(basis_cols, axis=1))
    basis_pref = basis.take_rows(rank_prefix)
    if rank(basis_pref) != k:
        raise ValueError("rank prefix does not determine coordinates")

    images = {}
    for p, scale in hecke_ops:
        out = hecke_series_mod(basis.entries, p, scale, q, first_index=first_index)
        images[p] = out[:rank_prefix, :]

    for attempt in range(max_attempts):
        rng = random.Random(f"{level}:{conrey}:{attempt}")
        combo = tuple((p, rng.randrange(1, q)) for p, _ in hecke_ops)
        total = np.zeros((rank_prefix, k), dtype=np.int64)
        for p, c in combo:
            total = (total + c * images[p]) % q
        coords = solve_matrix(basis_pref, FqMatrix(q, total))
        if coords is None:
            raise ArithmeticError("stable space is not closed under the Hecke action")
        amat = coords.entries
        if k_old and amat[k_old:, :k_old].any():
            raise ArithmeticError("old subspace is not Hecke-stable")
        cp_new = charpoly_mod(amat[k_old:, k_old:], q)
        cp_old = charpoly_mod(amat[:k_old, :k_old], q) if k_old else [1]
        if not poly_is_squarefree(cp_new, q):
            continue
        if len(poly_gcd(cp_new, cp_old, q)) != 1:
            continue
        roots = poly_roots(cp_new, q, random.Random(f"{level}:{conrey}:{attempt}:roots"))
        out: List[Eigenvector] = []
        a1_row = 1 - first_index
        for lam in roots:
            shifted = (amat - lam * np.eye(k, dtype=np.int64)) % q
            eig = nullspace_mod(shifted, q)
            if eig.shape[1] != 1:
                raise ArithmeticError("eigenvalue multiplicity is not one")
            series = matmul_mod(basis.entries, eig, q)[:, 0]
            a1 = int(series[a1_row])
            if a1 == 0:
                logger.warning("dropping eigenvector with a_1 = 0 at level %d", level)
                continue
            series = series * pow(a1, q - 2, q) % q
            out.append(Eigenvector(series=series, eigenvalue=lam, combo=combo))
        if len(roots) < len(cp_new) - 1:
            logger.debug("level %d: %d eigenvalues outside the prime field",
                         level, len(cp_new) - 1 - len(roots))
        return out
    raise ArithmeticError(
        f"no Hecke combination separated old and new spectra in {max_attempts} attempts")
