"""Basis matrices for the weight-2 cusp space with trivial character.

The new subspace at level N decomposes along Galois orbits of twist pairs;
each orbit carries a trace form whose Hecke translates, embedded at the
exponents that survive twist-equivalence deduplication, give a basis.  The
full space is then the union of divisor-rescaled lifts of lower newform
bases.  Column coefficients are exact cyclotomic integers, natively at the
small order of their own orbit and re-expressible at the shared order H on
demand.

Independence of the Hecke translates is established by rank over a residue
field with a root of unity of the right order (a mod-q rank of d certifies
exact rank d, since reduction can only lose rank) and then re-certified
over the rational field via the regular representation, which needs no
division in the cyclotomic ring.

Dimensions come cheap: the first trace coefficient of every orbit is its
constituent's dimension, so column counts for any level are available
without touching Hecke translates at all.  `dim_s2_new_trace` and
`dim_s2_full_trace` expose that path; the genus-formula `dim_s2_oracle`
is the independent cross-check.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .arithmetic import (
    divisors,
    euler_phi,
    factorize,
    is_prime,
    kronecker,
    level_index,
    num_divisors,
    sturm_bound,
)
from .characters import twist_class_key
from .cyclotomic import CyclotomicInteger, ModularProjection
from .fq_linalg import FqMatrix, rank
from .traceform import (
    TraceForm,
    TwistPairOrbit,
    hecke_on_traceform,
    twist_pair_orbits,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# dimension formulas


@lru_cache(maxsize=None)
def dim_s2_oracle(N: int) -> int:
    """dim S_2(N, trivial) = genus of the level-N modular curve."""
    if N < 1:
        raise ValueError("level must be positive")
    if N % 4 == 0:
        nu2 = 0
    else:
        nu2 = 1
        for p, _ in factorize(N):
            nu2 *= 1 + kronecker(-4, p)
    if N % 9 == 0:
        nu3 = 0
    else:
        nu3 = 1
        for p, _ in factorize(N):
            nu3 *= 1 + kronecker(-3, p)
    nuinf = sum(euler_phi(math.gcd(d, N // d)) for d in divisors(N))
    g = 1 + Fraction(level_index(N), 12) - Fraction(nu2, 4) - Fraction(nu3, 3) \
        - Fraction(nuinf, 2)
    assert g.denominator == 1 and g >= 0
    return int(g)


@lru_cache(maxsize=None)
def dim_s2_new_oracle(N: int) -> int:
    """New-subspace dimension by peeling divisor lifts off the genus."""
    total = dim_s2_oracle(N)
    for M in divisors(N):
        if M < N:
            total -= num_divisors(N // M) * dim_s2_new_oracle(M)
    return total


# ---------------------------------------------------------------------------
# per-level working state


class _LevelState:
    """Orbits, trace forms and grown index sets for one level.

    Lives for the process; trace coefficients and B sets are grown once
    and reused by every later request at the level.
    """

    def __init__(self, N: int):
        self.N = N
        self.orbits, self.forms = _active_orbits(N)
        self.A = embedding_set_A(self.orbits)
        self.B: Dict[TwistPairOrbit, List[int]] = {}


def _rational_orbit_traces(form: TraceForm, beta: int) -> Tuple[int, ...]:
    """Hecke traces on the orbit's embedded subspace, indices 1..beta.

    For order > 2 the coefficient is summed over its Galois conjugates and
    halved: the ambient character is trivial, so eigenvalue systems are
    real and the conjugate embedding repeats the same subspace.
    """
    r = form.order
    out: List[int] = []
    for n in range(1, beta + 1):
        c = form.coeff(n)
        if r <= 2:
            out.append(c.coeffs[0])
            continue
        acc = None
        for a in range(1, r):
            if math.gcd(a, r) == 1:
                g = c.galois_map(a)
                acc = g if acc is None else acc + g
        if any(acc.coeffs[1:]) or acc.coeffs[0] % 2:
            raise ArithmeticError(
                f"Galois-summed trace is not an even integer at n={n}: {acc}")
        out.append(acc.coeffs[0] // 2)
    return tuple(out)


def _active_orbits(N: int) -> Tuple[List[TwistPairOrbit], Dict[TwistPairOrbit, TraceForm]]:
    """Pair orbits that actually enter the level-N decomposition.

    Zero-dimensional constituents are dropped up front: they contribute no
    columns, and letting them claim keys in the embedding deduplication
    would suppress columns of a later twist-equivalent orbit.  Orbits
    whose embedded-subspace traces agree to the Sturm bound span the same
    space (equal traces force equal characteristic polynomials of every
    Hecke operator, hence equal eigensystem multisets), so later
    duplicates are dropped; this catches pairs differing by a quadratic
    character whose twist fixes the minimal space setwise, which the
    embedding-level equivalence test cannot see.
    """
    kept: List[TwistPairOrbit] = []
    forms: Dict[TwistPairOrbit, TraceForm] = {}
    for o in twist_pair_orbits(N):
        form = TraceForm(o)
        if form.dimension == 0:
            continue
        kept.append(o)
        forms[o] = form
    final: List[TwistPairOrbit] = []
    beta = sturm_bound(N, 2)
    prefix = min(beta, 20)
    buckets: Dict[Tuple[int, ...], List[TwistPairOrbit]] = {}
    full: Dict[TwistPairOrbit, Tuple[int, ...]] = {}

    def full_sig(o: TwistPairOrbit) -> Tuple[int, ...]:
        got = full.get(o)
        if got is None:
            got = full[o] = _rational_orbit_traces(forms[o], beta)
        return got

    for o in kept:
        bucket = buckets.setdefault(_rational_orbit_traces(forms[o], prefix), [])
        if any(full_sig(prev) == full_sig(o) for prev in bucket):
            logger.debug("level %d: merging pair <%d, mod %d> into an equal-trace twin",
                         N, o.inner_level, o.orbit.modulus)
            continue
        bucket.append(o)
        final.append(o)
    return final, {o: forms[o] for o in final}


_STATES: Dict[int, _LevelState] = {}
_BASES: Dict[Tuple[int, int], "Weight2Basis"] = {}


def _state(N: int) -> _LevelState:
    st = _STATES.get(N)
    if st is None:
        st = _LevelState(N)
        _STATES[N] = st
    return st


def clear_cache() -> None:
    _STATES.clear()
    _BASES.clear()


def trace_index_high_water() -> int:
    """Largest trace-form coefficient index requested so far, all levels."""
    top = 0
    for st in _STATES.values():
        for form in st.forms.values():
            top = max(top, form.max_index_requested)
    return top


@lru_cache(maxsize=None)
def _rank_projection(order: int, level: int, skip: int = 0) -> ModularProjection:
    """Residue field with an order-`order` root of unity for rank tests.

    Primes are kept above 4000 so spurious mod-q dependencies stay rare;
    `skip` steps to later primes when a retry wants a fresh field.
    """
    step = max(order, 1)
    q = step * (4096 // step + 1) + 1
    found = 0
    while True:
        if (q - 1) % step == 0 and is_prime(q) and level % q:
            if found == skip:
                return ModularProjection(step, level=level, q=q)
            found += 1
        q += step


# ---------------------------------------------------------------------------
# the Lemma's sets


def embedding_set_A(orbits: Sequence[TwistPairOrbit],
                    dedup: bool = True) -> Dict[TwistPairOrbit, List[int]]:
    """Embedding exponents per orbit after twist-equivalence deduplication.

    Exponents run over residues coprime to the orbit order r with a <= r/2
    (conjugate embeddings are identified; the unique embedding survives for
    r <= 2).  A candidate is dropped when some already-retained embedding
    of a pair with the same inner level and order embeds to a
    twist-equivalent character.  `dedup=False` keeps every candidate; the
    extra columns add no new directions to the span.
    """
    seen = set()
    out: Dict[TwistPairOrbit, List[int]] = {}
    for o in orbits:
        r = o.order
        rep = o.orbit.representative
        if r <= 2:
            candidates = [1]
        else:
            candidates = [a for a in range(1, r // 2 + 1) if math.gcd(a, r) == 1]
        retained: List[int] = []
        for a in candidates:
            key = (o.inner_level, r, twist_class_key(rep ** a))
            if dedup:
                if key in seen:
                    continue
                seen.add(key)
            retained.append(a)
        out[o] = retained
    return out


def basis_set_B(orbit: TwistPairOrbit, d: Optional[int] = None,
                beta: Optional[int] = None, rows: Optional[int] = None) -> List[int]:
    """Hecke indices b whose translates of the orbit's trace form are
    linearly independent, grown greedily until there are d of them.

    Independence is tested on the first `rows` coefficients (default: the
    weight-2 Sturm bound at the inner level) over a residue field, then
    certified rationally.  Exhausting b <= beta without reaching d raises,
    since the decomposition guarantees a valid set exists.
    """
    st = _state(orbit.level)
    if orbit not in st.forms:
        raise ValueError("orbit is not part of this level's deduplicated decomposition")
    form = st.forms[orbit]
    true_d = form.dimension
    if d is not None and d != true_d:
        raise ValueError(f"orbit dimension is {true_d}, not {d}")
    return _grow_B(st, orbit, rows, beta_cap=beta)


def _grow_B(st: _LevelState, orbit: TwistPairOrbit, rows: Optional[int],
            beta_cap: Optional[int] = None) -> List[int]:
    cached = st.B.get(orbit)
    if cached is not None:
        return cached
    form = st.forms[orbit]
    d = form.dimension
    if d == 0:
        st.B[orbit] = []
        return []
    beta = beta_cap if beta_cap is not None else sturm_bound(orbit.inner_level, 2)
    r = orbit.order
    rows = rows if rows is not None else beta
    rows = max(rows, d)
    attempt = 0
    while True:
        proj = _rank_projection(r, st.N, skip=attempt)
        q = proj.q
        chosen: List[int] = []
        stack = np.zeros((rows, 0), dtype=np.int64)
        cur_rank = 0
        for b in range(1, beta + 1):
            vec = hecke_on_traceform(form, b, rows)
            pv = np.array([proj.project(c) for c in vec], dtype=np.int64).reshape(-1, 1)
            trial = np.hstack([stack, pv])
            if rank(FqMatrix(q, trial)) > cur_rank:
                stack = trial
                cur_rank += 1
                chosen.append(b)
                if cur_rank == d:
                    break
        if cur_rank == d:
            _certify_rational_rank(
                [hecke_on_traceform(form, b, rows) for b in chosen], r, d)
            st.B[orbit] = chosen
            return chosen
        if rows < beta:
            rows = min(2 * rows, beta)
            logger.debug("level %d orbit <%d>: escalating rank rows to %d",
                         st.N, orbit.inner_level, rows)
        elif attempt < 2:
            attempt += 1
        else:
            raise ArithmeticError(
                f"translates T_b, b <= {beta}, of the <{orbit.inner_level}> trace form "
                f"at level {st.N} span {cur_rank} < {d} dimensions")


def _certify_rational_rank(cols: List[List[CyclotomicInteger]], order: int,
                           expected: int) -> None:
    """Exact independence over the cyclotomic field, division-free.

    Each column is expanded through the regular representation: the span
    over the field has full rank d exactly when the rational matrix of all
    zeta-shifts has rank d * phi(order).
    """
    phi = euler_phi(order)
    shifts = [CyclotomicInteger.zeta_power(order, t) for t in range(phi)]
    rows = []
    for col in cols:
        for t in range(phi):
            rows.append([coeff for c in col for coeff in (c * shifts[t]).coeffs])
    got = _rational_row_rank(rows)
    if got != expected * phi:
        raise ArithmeticError(
            "residue-field rank is not reproduced over the rationals "
            f"({got} != {expected * phi}); this should be impossible")


def _rational_row_rank(rows: List[List[int]]) -> int:
    mat = [[Fraction(x) for x in row] for row in rows]
    rank_found = 0
    ncols = len(mat[0]) if mat else 0
    col = 0
    while rank_found < len(mat) and col < ncols:
        piv = next((i for i in range(rank_found, len(mat)) if mat[i][col]), None)
        if piv is None:
            col += 1
            continue
        mat[rank_found], mat[piv] = mat[piv], mat[rank_found]
        prow = mat[rank_found]
        inv = 1 / prow[col]
        for i in range(rank_found + 1, len(mat)):
            f = mat[i][col] * inv
            if f:
                mat[i] = [x - f * y for x, y in zip(mat[i], prow)]
        rank_found += 1
        col += 1
    return rank_found


# ---------------------------------------------------------------------------
# basis objects


@dataclass(frozen=True)
class ColumnProvenance:
    """Where one basis column came from."""

    inner_level: int
    orbit_modulus: int
    orbit_conrey: int
    embedding: int
    hecke_index: int
    lift: int


class Weight2Basis:
    """m x d matrix of exact q-expansion coefficients a_1..a_m per column.

    Entries are stored at each column's native cyclotomic order; `matrix`
    re-expresses everything at the shared order H, and `project` goes
    straight from the native entries into a residue field.
    """

    def __init__(self, level: int, precision: int, order: int,
                 columns: List[List[CyclotomicInteger]],
                 provenance: List[ColumnProvenance]):
        if len(columns) != len(provenance):
            raise ValueError("one provenance record per column required")
        for col in columns:
            if len(col) != precision:
                raise ValueError("column length differs from precision")
            for c in col:
                if order % c.order:
                    raise ValueError("entry order does not divide the basis order")
        self.level = level
        self.precision = precision
        self.order = order
        self.columns = columns
        self.provenance = provenance
        self._matrix: Optional[List[List[CyclotomicInteger]]] = None

    @property
    def dim(self) -> int:
        return len(self.columns)

    @property
    def matrix(self) -> List[List[CyclotomicInteger]]:
        """Row-major coefficients at the shared order: matrix[n-1][j] = a_n of column j."""
        if self._matrix is None:
            cols = [[c.change_order(self.order) for c in col] for col in self.columns]
            self._matrix = [[col[i] for col in cols] for i in range(self.precision)]
        return self._matrix

    def project(self, proj: ModularProjection) -> np.ndarray:
        out = np.zeros((self.precision, self.dim), dtype=np.int64)
        for j, col in enumerate(self.columns):
            for i, c in enumerate(col):
                out[i, j] = proj.project(c)
        return out

    def truncated(self, m: int) -> "Weight2Basis":
        if m > self.precision:
            raise ValueError("cannot truncate upward")
        return Weight2Basis(self.level, m, self.order,
                            [col[:m] for col in self.columns], self.provenance)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Weight2Basis)
                and self.level == other.level
                and self.precision == other.precision
                and self.order == other.order
                and self.provenance == other.provenance
                and self.columns == other.columns)


def newform_basis(N: int, m: int, H: int) -> Weight2Basis:
    """Basis of the weight-2 new subspace at level N, trivial character.

    Columns are Galois embeddings (exponents from the deduplicated A sets)
    of Hecke translates (indices from the greedily grown B sets) of each
    orbit's trace form.  Rank tests during growth run at m rows, so trace
    coefficients are consumed only up to max(B) * m; the assembled matrix
    is checked for full column rank, fatally when m reaches the Sturm
    bound and advisorily below it.
    """
    if m < 1:
        raise ValueError("precision must be at least 1")
    st = _state(N)
    columns: List[List[CyclotomicInteger]] = []
    prov: List[ColumnProvenance] = []
    for o in st.orbits:
        form = st.forms[o]
        d = form.dimension
        exps = st.A[o]
        if d == 0 or not exps:
            continue
        if H % o.order:
            raise ValueError(f"orbit order {o.order} does not divide H = {H}")
        B = _grow_B(st, o, m)
        translates = {b: hecke_on_traceform(form, b, m) for b in B}
        for a in exps:
            for b in B:
                vec = translates[b]
                col = vec if a == 1 else [c.galois_map(a) for c in vec]
                columns.append(list(col))
                prov.append(ColumnProvenance(
                    inner_level=o.inner_level,
                    orbit_modulus=o.orbit.modulus,
                    orbit_conrey=min(o.orbit.conrey_indices),
                    embedding=a,
                    hecke_index=b,
                    lift=1,
                ))
    basis = Weight2Basis(N, m, H, columns, prov)
    _check_assembled_rank(basis)
    return basis


def _check_assembled_rank(basis: Weight2Basis) -> None:
    d = basis.dim
    if d == 0:
        return
    beta = sturm_bound(basis.level, 2)
    if basis.precision < d:
        # too few rows for full column rank no matter the entries
        logger.debug("level %d: %d columns cannot be certified on %d rows",
                     basis.level, d, basis.precision)
        return
    shared = 1
    for col in basis.columns:
        shared = shared * col[0].order // math.gcd(shared, col[0].order)
    for attempt in range(3):
        proj = _rank_projection(shared, basis.level, skip=attempt)
        if rank(FqMatrix(proj.q, basis.project(proj))) == d:
            return
    msg = (f"level {basis.level}: assembled weight-2 matrix has column rank "
           f"below {d} at precision {basis.precision}")
    if basis.precision >= beta:
        raise ArithmeticError(msg)
    logger.warning("%s (below the Sturm bound %d; truncation artifact)", msg, beta)


def _cached_newform_basis(N: int, m: int, H: int) -> Weight2Basis:
    key = (N, H)
    got = _BASES.get(key)
    if got is not None and got.precision >= m:
        return got.truncated(m) if got.precision > m else got
    fresh = newform_basis(N, m, H)
    _BASES[key] = fresh
    return fresh


def full_basis(N: int, m: int, H: int) -> Weight2Basis:
    """Basis of all of S_2(N, trivial): divisor lifts of newform bases.

    A lift by b' sends a_n to a_{n/b'} (zero off multiples), so the
    source basis at the same precision m covers every lift.  Columns are
    ordered by inner level, then lift, then the source column order.
    """
    columns: List[List[CyclotomicInteger]] = []
    prov: List[ColumnProvenance] = []
    for Mp in divisors(N):
        src = _cached_newform_basis(Mp, m, H)
        if src.dim == 0:
            continue
        for bp in divisors(N // Mp):
            for col, p in zip(src.columns, src.provenance):
                zero = CyclotomicInteger.from_int(col[0].order, 0)
                lifted = [col[n // bp - 1] if n % bp == 0 else zero
                          for n in range(1, m + 1)]
                columns.append(lifted)
                prov.append(ColumnProvenance(
                    inner_level=p.inner_level,
                    orbit_modulus=p.orbit_modulus,
                    orbit_conrey=p.orbit_conrey,
                    embedding=p.embedding,
                    hecke_index=p.hecke_index,
                    lift=bp,
                ))
    return Weight2Basis(N, m, H, columns, prov)


def dim_s2_new_trace(N: int) -> int:
    """New-subspace dimension straight from first trace coefficients."""
    st = _state(N)
    return sum(len(st.A[o]) * st.forms[o].dimension for o in st.orbits)


def dim_s2_full_trace(N: int) -> int:
    """Full-space dimension via divisor lifts of trace dimensions."""
    return sum(num_divisors(N // M) * dim_s2_new_trace(M) for M in divisors(N))


# ---------------------------------------------------------------------------
# cache files


def save_basis(basis: Weight2Basis, path: str) -> None:
    doc = {
        "level": basis.level,
        "precision": basis.precision,
        "dim": basis.dim,
        "order": basis.order,
        "columns": [
            {
                **asdict(p),
                "entry_order": col[0].order if col else 1,
                "coeffs": [list(c.coeffs) for c in col],
            }
            for col, p in zip(basis.columns, basis.provenance)
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_basis(path: str) -> Weight2Basis:
    with open(path) as fh:
        doc = json.load(fh)
    columns = []
    prov = []
    for rec in doc["columns"]:
        r = rec["entry_order"]
        columns.append([CyclotomicInteger(r, tuple(cs)) for cs in rec["coeffs"]])
        prov.append(ColumnProvenance(
            inner_level=rec["inner_level"],
            orbit_modulus=rec["orbit_modulus"],
            orbit_conrey=rec["orbit_conrey"],
            embedding=rec["embedding"],
            hecke_index=rec["hecke_index"],
            lift=rec["lift"],
        ))
    basis = Weight2Basis(doc["level"], doc["precision"], doc["order"], columns, prov)
    if basis.dim != doc["dim"]:
        raise ValueError("cache file dimension header disagrees with its columns")
    return basis
