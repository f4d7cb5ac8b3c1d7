"""Weight-1 newform eigenbases by Hecke stability over a residue field.

A candidate space for S_1(N, chi) is carved out of weight 2: divide a basis
of S_2(N, trivial) by Eisenstein series of character conj(chi), intersect the
quotients, and cut down to the largest subspace the first good Hecke operator
preserves.  All of that happens over F_q for a prime q = 1 (mod H), where H
bounds the order of every Satake parameter that can appear.  Eigenvectors of
the stabilised space are then recognised: each prime coefficient must come
from roots of unity (a quadratic in F_q that splits, with both roots lifting
through the projection), the lifted parameters regenerate the form over
Z[zeta_H] by Hecke relations, and a final exact product test back in weight 2
certifies membership.  Anything that fails along the way is discarded and
counted; the survivors are the eigenbasis.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .arithmetic import (
    _sqrt_mod_prime,
    divisors,
    euler_phi,
    is_prime,
    kronecker,
    least_prime_not_dividing,
    primes_up_to,
    smallest_prime_factor_table,
    sturm_bound,
    valuation,
)
from .characters import DirichletCharacter
from .cyclotomic import CyclotomicInteger, LiftError, ModularProjection
from .eisenstein import EisensteinSeries, eis_basis_set, eis_coeffs
from .fq_linalg import (
    FqMatrix,
    QExpansion,
    column_space_basis,
    column_space_intersection,
    diagonalise_new,
    project_expansion,
    rank,
    solve_matrix,
    stable_subspace,
)
from .kernels import divide_series_mod
from .weight2 import Weight2Basis, dim_s2_oracle, full_basis

logger = logging.getLogger(__name__)

__all__ = [
    "Diagnostics",
    "DIAGNOSTICS",
    "NewformRecord",
    "PrefixRankError",
    "SatakeData",
    "clear_space_cache",
    "compute_H",
    "compute_space",
    "extract_satake",
    "lift_form",
    "order_combine",
    "stabilise",
    "validate_record",
    "verify_form",
]


class PrefixRankError(ValueError):
    """Raised when a coefficient prefix is too short to be rank-faithful.

    The caller's response is to grow the precision and rebuild; the message
    records which prefix fell short.
    """


@dataclass
class Diagnostics:
    """Counters for candidate attrition during eigenform recognition."""

    candidates: int = 0
    discarded_constant: int = 0
    discarded_split: int = 0
    discarded_lift: int = 0
    discarded_roundtrip: int = 0
    discarded_verify: int = 0

    def reset(self) -> None:
        for name in self.__dataclass_fields__:
            setattr(self, name, 0)

    def discarded(self) -> int:
        return (self.discarded_constant + self.discarded_split
                + self.discarded_lift + self.discarded_roundtrip
                + self.discarded_verify)


DIAGNOSTICS = Diagnostics()


# ---------------------------------------------------------------------------
# Satake parameter order bound


def order_combine(a: int, b: int) -> int:
    """2 lcm(a, b): a bound for Ord(alpha) given Ord(alpha/beta) | a and
    Ord(alpha beta) | b."""
    if a < 1 or b < 1:
        raise ValueError("orders must be positive")
    return 2 * math.lcm(a, b)


def compute_H(N: int, chi: DirichletCharacter, D: int = 1) -> int:
    """Common multiple of all Satake parameter orders at level N.

    Exotic eigenforms contribute a factor of 60 through their projective
    images, the nebentypus contributes phi(N), and D is the lcm of the
    projective image orders of the dihedral forms at levels between the
    conductor and N (1 when there are none).
    """
    if N < 1 or D < 1:
        raise ValueError("level and D must be positive")
    if N % chi.conductor:
        raise ValueError("character conductor does not divide the level")
    return 2 * math.lcm(60, euler_phi(N), D)


# ---------------------------------------------------------------------------
# stabilisation


def _quotient_columns(numer: np.ndarray, evec: np.ndarray, q: int) -> np.ndarray:
    """Divide each column of `numer` (coefficients a_0..a_m) by the series
    `evec`, returning the quotients truncated to indices 0..m-1.

    The divisor must have an invertible coefficient at index 0 or 1; a
    valuation-1 divisor costs exactly the one row of precision the
    truncation drops anyway, so both cases land in the same shape.
    """
    m_plus = numer.shape[0]
    if evec[0] % q:
        v = 0
    elif m_plus > 1 and evec[1] % q:
        v = 1
    else:
        raise ZeroDivisionError("Eisenstein series has no invertible leading coefficient")
    out = np.zeros((m_plus - 1, numer.shape[1]), dtype=np.int64)
    ea = evec[v:]
    n = m_plus - v
    for j in range(numer.shape[1]):
        col = divide_series_mod(numer[v:, j], ea, q, n)
        out[:, j] = col[: m_plus - 1]
    return out


def stabilise(N: int, chi: DirichletCharacter, W2: Weight2Basis,
              E_set: Sequence[EisensteinSeries], sigma: ModularProjection,
              p: int) -> FqMatrix:
    """Image of S_1(N, chi) in F_q, as coefficient columns a_0..a_{m-1}.

    W2 supplies the weight-2 numerators (a_1..a_m per column); each series in
    E_set must lie in the Eisenstein basis set for conj(chi).  The quotients'
    column spans are intersected and the largest T_p-stable subspace of the
    result is returned.  Raises PrefixRankError when m is too small for
    either the weight-2 prefix-rank condition or the stable-subspace
    membership test; the caller grows m and retries.
    """
    if W2.level != N:
        raise ValueError("weight-2 basis belongs to a different level")
    if N % p == 0:
        raise ValueError("stabilising prime must not divide the level")
    target = chi.conjugate().primitive()
    for E in E_set:
        if E.level != N or E.character != target:
            raise ValueError("Eisenstein series has the wrong level or character")
    if not E_set:
        raise ValueError("need at least one Eisenstein series to divide by")
    q = sigma.q
    m = W2.precision
    d = W2.dim
    proj = W2.project(sigma)
    if rank(FqMatrix(q, proj[: m // p, :])) < d:
        raise PrefixRankError(f"first {m // p} weight-2 rows have rank < {d}")
    numer = np.vstack([np.zeros((1, d), dtype=np.int64), proj])
    quotients = []
    for E in E_set:
        evec = np.array(eis_coeffs(E, m).scaled_projection(sigma), dtype=np.int64)
        quotients.append(FqMatrix(q, _quotient_columns(numer, evec, q)))
    meet = column_space_intersection(*quotients)
    if meet.ncols == 0:
        return meet
    t = (m - 1) // p + 1
    if rank(meet.take_rows(t)) < meet.ncols:
        raise PrefixRankError(
            f"{t}-row prefix does not determine the intersected space")
    e = chi.value_exponent(p, sigma.H)
    assert e is not None
    return stable_subspace(meet, p, sigma.zeta_power(e), rank_prefix=t,
                           first_index=0)


# ---------------------------------------------------------------------------
# Satake extraction and lifting


@dataclass(frozen=True)
class SatakeData:
    """Satake parameters of one eigenform, as exponents of zeta_H.

    `data` maps each prime up to the working precision to the exponent of
    one parameter at that prime, or to None for ramified primes that admit
    no parameter (the forced a_p = 0 case).  At an unramified prime the
    companion parameter is chi(p) / alpha_p, so one exponent determines the
    pair.
    """

    H: int
    data: Tuple[Tuple[int, Optional[int]], ...]

    def __post_init__(self):
        last = 0
        for p, j in self.data:
            if p <= last:
                raise ValueError("primes must be strictly increasing")
            if j is not None and not 0 <= j < self.H:
                raise ValueError("exponent out of range")
            last = p

    @classmethod
    def from_dict(cls, H: int, entries: Mapping[int, Optional[int]]) -> "SatakeData":
        return cls(H, tuple(sorted(entries.items())))

    def get(self, p: int) -> Optional[int]:
        for pp, j in self.data:
            if pp == p:
                return j
        raise KeyError(f"no Satake data at {p}")

    @property
    def primes(self) -> Tuple[int, ...]:
        return tuple(p for p, _ in self.data)

    def galois(self, u: int) -> "SatakeData":
        if math.gcd(u, self.H) != 1:
            raise ValueError("galois exponent not coprime to H")
        return SatakeData(self.H, tuple(
            (p, None if j is None else j * u % self.H) for p, j in self.data))


def _forced_zero(N: int, chi: DirichletCharacter, p: int) -> bool:
    """Whether a_p = 0 is forced at the ramified prime p."""
    return N % (p * p) == 0 and valuation(chi.conductor, p) < valuation(N, p)


def extract_satake(eigen: Mapping[int, int], N: int, chi: DirichletCharacter,
                   sigma: ModularProjection) -> Optional[SatakeData]:
    """Satake exponents from prime eigenvalue residues, or None to discard.

    For p not dividing N the quadratic x^2 - a_p x + chi(p) must split over
    F_q and both roots must be images of H-th roots of unity; for p | N the
    eigenvalue itself is the lone parameter, zero exactly when the level and
    conductor force it.  Any failure marks the candidate as ethereal or a
    modular function and returns None, bumping the matching counter.
    """
    q = sigma.q
    H = sigma.H
    inv2 = pow(2, q - 2, q)
    out: Dict[int, Optional[int]] = {}
    for p in sorted(eigen):
        ap = eigen[p] % q
        if N % p == 0:
            if _forced_zero(N, chi, p):
                if ap:
                    DIAGNOSTICS.discarded_lift += 1
                    return None
                out[p] = None
                continue
            if ap == 0:
                DIAGNOSTICS.discarded_lift += 1
                return None
            try:
                out[p] = sigma.lift_root_of_unity(ap)
            except LiftError:
                DIAGNOSTICS.discarded_lift += 1
                return None
            continue
        e = chi.value_exponent(p, H)
        assert e is not None
        cp = sigma.zeta_power(e)
        disc = (ap * ap - 4 * cp) % q
        if disc and kronecker(disc, q) != 1:
            DIAGNOSTICS.discarded_split += 1
            return None
        s = _sqrt_mod_prime(disc, q)
        try:
            j1 = sigma.lift_root_of_unity((ap + s) * inv2 % q)
            j2 = sigma.lift_root_of_unity((ap - s) * inv2 % q)
        except LiftError:
            DIAGNOSTICS.discarded_lift += 1
            return None
        out[p] = min(j1, j2)
    return SatakeData.from_dict(H, out)


def _zeta_sum(H: int, exponents: Sequence[int]) -> CyclotomicInteger:
    """Sum of zeta_H^j over the exponents, expressed at the smallest order
    the exponent set itself allows."""
    g = math.gcd(H, *exponents) if exponents else H
    order = H // g
    terms: Dict[int, int] = {}
    for j in exponents:
        k = (j // g) % order
        terms[k] = terms.get(k, 0) + 1
    return CyclotomicInteger.from_zeta_terms(order, terms)


def lift_form(satake: SatakeData, N: int, chi: DirichletCharacter, H: int,
              m: int) -> QExpansion:
    """Regenerate a_0..a_m over Z[zeta_H] from Satake exponents.

    a_1 = 1; prime coefficients come straight from the parameters; composite
    ones follow a_n = a_{n/p} a_p - chi(p) a_{n/p^2} (weight 1, so no power
    of p), with the second term dropped when p^2 does not divide n or when
    p divides the level.
    """
    if satake.H != H:
        raise ValueError("Satake data was lifted at a different order")
    one = CyclotomicInteger.from_int(1, 1)
    zero = CyclotomicInteger.from_int(1, 0)
    coeffs: List[CyclotomicInteger] = [zero, one] + [zero] * max(0, m - 1)
    spf = smallest_prime_factor_table(max(m, 2))
    for p in primes_up_to(m):
        j = satake.get(p)
        if N % p == 0:
            coeffs[p] = zero if j is None else _zeta_sum(H, [j])
            continue
        e = chi.value_exponent(p, H)
        assert e is not None and j is not None
        coeffs[p] = _zeta_sum(H, [j, (e - j) % H])
    for n in range(4, m + 1):
        p = spf[n]
        if n == p:
            continue
        acc = coeffs[n // p] * coeffs[p]
        if n % (p * p) == 0 and N % p:
            j2, r2 = chi.evaluate(p)
            acc = acc - CyclotomicInteger.zeta_power(r2, j2) * coeffs[n // (p * p)]
        coeffs[n] = acc
    return QExpansion(1, N, chi, "cyclotomic", coeffs, m)


# ---------------------------------------------------------------------------
# exact verification in weight 2


@dataclass(frozen=True)
class _CycFrac:
    """Element of Q(zeta_R) as an integral numerator over a positive
    denominator; just enough field arithmetic for Gaussian elimination."""

    num: CyclotomicInteger
    den: int

    @classmethod
    def of(cls, c: CyclotomicInteger) -> "_CycFrac":
        return cls(c, 1)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __mul__(self, other: "_CycFrac") -> "_CycFrac":
        return _CycFrac(self.num * other.num, self.den * other.den)

    def __sub__(self, other: "_CycFrac") -> "_CycFrac":
        return _CycFrac(self.num * other.den - other.num * self.den,
                        self.den * other.den)

    def inverse(self) -> "_CycFrac":
        if self.is_zero():
            raise ZeroDivisionError("inverting zero")
        w = self.num
        n = w.order
        phi = len(w.coeffs)
        cols = [w * CyclotomicInteger.zeta_power(n, t) for t in range(phi)]
        mat = [[Fraction(cols[t].coeffs[i]) for t in range(phi)] for i in range(phi)]
        vec = [Fraction(1 if i == 0 else 0) for i in range(phi)]
        # dense exact elimination; phi is small for every order we meet
        for c in range(phi):
            sel = next(r for r in range(c, phi) if mat[r][c])
            mat[c], mat[sel] = mat[sel], mat[c]
            vec[c], vec[sel] = vec[sel], vec[c]
            inv = 1 / mat[c][c]
            mat[c] = [x * inv for x in mat[c]]
            vec[c] *= inv
            for r in range(phi):
                if r != c and mat[r][c]:
                    f = mat[r][c]
                    mat[r] = [x - f * y for x, y in zip(mat[r], mat[c])]
                    vec[r] -= f * vec[c]
        den = math.lcm(*(x.denominator for x in vec)) if phi else 1
        coeffs = tuple(int(x * den) for x in vec)
        return _CycFrac(CyclotomicInteger(n, coeffs) * self.den, den)


def _exact_in_span(cols: List[List[CyclotomicInteger]],
                   target: List[CyclotomicInteger]) -> bool:
    """Does `target` lie in the span of the columns over the cyclotomic
    field?  `cols[i][j]` is row i of column j, all at one shared order.

    Plain Gauss-Jordan with exact field arithmetic: eliminate, then check
    that every un-pivoted row of the right-hand side vanished.
    """
    nrows = len(target)
    ncols = len(cols[0]) if cols and cols[0] else 0
    rows = [[_CycFrac.of(cols[i][j]) for j in range(ncols)] + [_CycFrac.of(target[i])]
            for i in range(nrows)]
    pivot_rows: List[int] = []
    used = [False] * nrows
    for c in range(ncols):
        sel = next((r for r in range(nrows) if not used[r] and not rows[r][c].is_zero()),
                   None)
        if sel is None:
            continue
        used[sel] = True
        pivot_rows.append(sel)
        inv = rows[sel][c].inverse()
        rows[sel] = [x * inv for x in rows[sel]]
        for r in range(nrows):
            if r != sel and not rows[r][c].is_zero():
                f = rows[r][c]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[sel])]
    return all(rows[r][ncols].is_zero() for r in range(nrows) if not used[r])


def _screen_projections(H: int, N: int, count: int, skip: int) -> List[ModularProjection]:
    """The `count` cheapest projections after skipping the first `skip`
    primes in the arithmetic progression 1 mod H (coprime to N)."""
    out: List[ModularProjection] = []
    q = H + 1
    seen = 0
    while len(out) < count:
        if is_prime(q) and N % q:
            if seen >= skip:
                out.append(ModularProjection(H, N, q))
            seen += 1
        q += H
    return out


def verify_form(f: QExpansion, E: EisensteinSeries, W2: Weight2Basis,
                screens: int = 2, skip_screens: int = 1) -> bool:
    """Exact test that f times the conjugated Eisenstein series is a weight-2
    cusp form, i.e. lies in the span of the weight-2 basis columns.

    Cheap route first: the product and basis are projected to `screens`
    residue fields beyond the one stabilisation used, and any inconsistent
    projected system refutes membership immediately.  Survivors get the
    binding check, an exact cyclotomic solve; only that result is returned.
    """
    N = f.level
    ms = sturm_bound(N, 2)
    if f.precision < ms:
        raise PrefixRankError(f"need {ms} product coefficients, have {f.precision}")
    if W2.precision < ms:
        raise PrefixRankError(f"weight-2 basis shorter than the Sturm bound {ms}")
    if f.character is None or E.character != f.character.primitive():
        raise ValueError("Eisenstein character does not cancel the form's")
    if E.level != N:
        raise ValueError("Eisenstein series lives at a different level")
    W2 = W2.truncated(ms)
    exp = eis_coeffs(E, ms)
    ebar: List[CyclotomicInteger] = [exp.scaled_constant().conjugate()]
    for c in exp.tail:
        ebar.append(c.conjugate() * exp.scale)
    fc = [_as_cyclo_coeff(f.coeff(n)) for n in range(ms + 1)]
    prod: List[CyclotomicInteger] = []
    for n in range(ms + 1):
        acc = CyclotomicInteger.from_int(1, 0)
        for i in range(1, n + 1):
            if not fc[i].is_zero():
                acc = acc + fc[i] * ebar[n - i]
        prod.append(acc)
    if not prod[0].is_zero():
        return False
    H = math.lcm(W2.order, *(c.order for c in prod))
    for proj in _screen_projections(H, N, screens, skip_screens):
        mat = FqMatrix(proj.q, W2.project(proj))
        rhs = FqMatrix(proj.q, np.asarray(
            [[proj.project(c)] for c in prod[1:]], dtype=np.int64))
        if solve_matrix(mat, rhs) is None:
            return False
    R = math.lcm(*(c.order for col in W2.columns for c in col),
                 *(c.order for c in prod))
    cols = [[W2.columns[j][i].change_order(R) for j in range(W2.dim)]
            for i in range(ms)]
    return _exact_in_span(cols, [c.change_order(R) for c in prod[1:]])


def _as_cyclo_coeff(c) -> CyclotomicInteger:
    if isinstance(c, CyclotomicInteger):
        return c
    if isinstance(c, Fraction):
        if c.denominator != 1:
            raise ValueError("fractional coefficient in a form to verify")
        return CyclotomicInteger.from_int(1, c.numerator)
    return CyclotomicInteger.from_int(1, int(c))


# ---------------------------------------------------------------------------
# eigenform records


@dataclass(frozen=True)
class NewformRecord:
    """One verified weight-1 newform: parameters, expansion, provenance."""

    level: int
    conrey: int
    H: int
    satake: SatakeData
    coeffs: QExpansion
    verified: bool

    def galois(self, u: int) -> "NewformRecord":
        """The conjugate form under zeta_H -> zeta_H^u."""
        if math.gcd(u, self.H) != 1:
            raise ValueError("galois exponent not coprime to H")
        chi = DirichletCharacter.from_conrey(self.level, self.conrey)
        chi_u = chi ** u
        new_coeffs = [c.galois_map(u % c.order) if c.order > 1 else c
                      for c in self.coeffs.coeffs]
        exp = QExpansion(1, self.level, chi_u, "cyclotomic", new_coeffs,
                         self.coeffs.precision)
        return NewformRecord(self.level, chi_u.conrey, self.H,
                             self.satake.galois(u), exp, self.verified)


def validate_record(rec: NewformRecord, tol: float = 1e-9) -> None:
    """Raise unless the record is multiplicative and Satake-bounded.

    Checks a_{mn} = a_m a_n for coprime pairs within precision, and
    |a_p| <= 2 under every complex embedding (sums of two roots of unity
    cannot be larger).
    """
    f = rec.coeffs
    m = f.precision
    for a in range(2, m + 1):
        for b in range(a, m // a + 1):
            if math.gcd(a, b) == 1:
                lhs = _as_cyclo_coeff(f.coeff(a * b))
                rhs = _as_cyclo_coeff(f.coeff(a)) * _as_cyclo_coeff(f.coeff(b))
                if lhs != rhs:
                    raise ArithmeticError(
                        f"a_{a * b} != a_{a} a_{b} at level {rec.level}")
    for p in primes_up_to(m):
        c = _as_cyclo_coeff(f.coeff(p))
        for u in range(1, c.order + 1):
            if math.gcd(u, c.order) == 1:
                if abs(c.embed_complex(u)) > 2 + tol:
                    raise ArithmeticError(
                        f"|a_{p}| exceeds 2 in embedding {u} at level {rec.level}")


# ---------------------------------------------------------------------------
# orchestration


OldformSupplier = Callable[[int, DirichletCharacter, int], Sequence[NewformRecord]]

_SPACE_CACHE: Dict[Tuple[int, int], List[NewformRecord]] = {}


def clear_space_cache() -> None:
    _SPACE_CACHE.clear()


def _builtin_supplier(dihedral_db) -> OldformSupplier:
    def get(level: int, character: DirichletCharacter,
            min_precision: int) -> Sequence[NewformRecord]:
        key = (level, character.conrey)
        cached = _SPACE_CACHE.get(key)
        if cached is not None and all(r.coeffs.precision >= min_precision
                                      for r in cached):
            return cached
        recs = compute_space(level, character, dihedral_db=dihedral_db,
                             precision=min_precision)
        _SPACE_CACHE[key] = recs
        return recs

    return get


def _old_matrix(N: int, chi: DirichletCharacter, supplier: OldformSupplier,
                sigma: ModularProjection, m: int) -> FqMatrix:
    """Projected span of all oldform lifts f(bz), as columns a_0..a_{m-1}."""
    q = sigma.q
    prim = chi.primitive()
    cols: List[List[int]] = []
    for Mlev in divisors(N):
        if Mlev == N or Mlev % prim.modulus or Mlev % 4 == 2:
            continue
        chi_M = prim.induce(Mlev)
        for rec in supplier(Mlev, chi_M, m - 1):
            base = [sigma.project(_as_cyclo_coeff(c))
                    for c in rec.coeffs.coeffs[:m]]
            for b in divisors(N // Mlev):
                cols.append([base[n // b] if n % b == 0 else 0 for n in range(m)])
    if not cols:
        return FqMatrix.zeros(q, m, 0)
    return column_space_basis(FqMatrix.from_columns(q, cols))


def _dihedral_d(dihedral_db, N: int, chi: DirichletCharacter) -> int:
    if dihedral_db is None:
        return 1
    return int(dihedral_db.d_value(N, chi))


def _dihedral_dim(dihedral_db, N: int, chi: DirichletCharacter) -> int:
    if dihedral_db is None:
        return 0
    return int(dihedral_db.dim_at(N, chi))


def compute_space(N: int, chi: DirichletCharacter,
                  oldform_db: Optional[OldformSupplier] = None,
                  dihedral_db=None,
                  precision: Optional[int] = None) -> List[NewformRecord]:
    """The verified eigenbasis of the weight-1 newform space at (N, chi).

    Runs the full pipeline: order bound H and residue field, weight-2 basis
    at an adaptively grown precision, stabilisation, simultaneous
    diagonalisation away from the oldform span, Satake extraction, lifting,
    and the exact weight-2 product test.  `oldform_db` supplies lower-level
    eigenforms (level, character, minimum precision); by default they are
    computed recursively and memoised.  `dihedral_db`, when given, must
    expose d_value(N, chi) for the order bound and dim_at(N, chi) as a
    lower-bound cross-check.  Records carry coefficients to at least
    max(Sturm bounds, `precision`).
    """
    if chi.modulus != N:
        raise ValueError("character modulus differs from the level")
    if N % 4 == 2 or chi.is_even():
        return []
    D = _dihedral_d(dihedral_db, N, chi)
    H = compute_H(N, chi, D)
    sigma = ModularProjection(H, N)
    p = least_prime_not_dividing(N)
    rec_prec = max(sturm_bound(N, 2), sturm_bound(N, 1), precision or 0, 4)
    supplier = oldform_db if oldform_db is not None else _builtin_supplier(dihedral_db)

    d_est = dim_s2_oracle(N)
    m = max(rec_prec + 1, p * (d_est + 2), 8)
    V = olds = W2 = None
    evs = None
    for _ in range(8):
        W2 = full_basis(N, m, H)
        try:
            V = stabilise(N, chi, W2, eis_basis_set(N, chi.conjugate()), sigma, p)
        except PrefixRankError as err:
            logger.debug("level %d: growing m past %d (%s)", N, m, err)
            m = m * 5 // 4 + 8
            continue
        if V.ncols == 0:
            break
        olds = _old_matrix(N, chi, supplier, sigma, m)
        n_ops = 1 if V.ncols == 1 else 3
        ops: List[Tuple[int, int]] = []
        ell = 2
        while len(ops) < n_ops:
            if N % ell:
                e = chi.value_exponent(ell, H)
                ops.append((ell, sigma.zeta_power(e)))
            ell = _next_prime(ell)
        t = min((m - 1) // ell_ + 1 for ell_, _ in ops)
        if rank(V.take_rows(t)) < V.ncols:
            logger.debug("level %d: diagonalisation prefix %d too short", N, t)
            m = m * 5 // 4 + 8
            continue
        try:
            evs = diagonalise_new(V, olds, N, chi.conrey, ops, rank_prefix=t,
                                  first_index=0)
        except ValueError as err:
            logger.debug("level %d: growing m past %d (%s)", N, m, err)
            m = m * 5 // 4 + 8
            continue
        break
    else:
        raise ArithmeticError(f"precision growth exhausted at level {N}")

    records: List[NewformRecord] = []
    if V is not None and V.ncols and evs:
        q = sigma.q
        ms = sturm_bound(N, 2)
        W2v = W2.truncated(ms) if W2.precision > ms else W2
        E_chi = eis_basis_set(N, chi)
        plist = primes_up_to(rec_prec)
        for ev in sorted(evs, key=lambda e: tuple(int(x) for x in e.series)):
            DIAGNOSTICS.candidates += 1
            vec = ev.series
            if int(vec[0]):
                DIAGNOSTICS.discarded_constant += 1
                continue
            eigen = {ell_: int(vec[ell_]) for ell_ in plist}
            sd = extract_satake(eigen, N, chi, sigma)
            if sd is None:
                continue
            fexp = lift_form(sd, N, chi, H, rec_prec)
            fres = project_expansion(fexp, sigma)
            bound = min(rec_prec, len(vec) - 1)
            if any(fres.coeffs[n] != int(vec[n]) for n in range(bound + 1)):
                DIAGNOSTICS.discarded_roundtrip += 1
                continue
            if not verify_form(fexp, E_chi[0], W2v):
                DIAGNOSTICS.discarded_verify += 1
                continue
            rec = NewformRecord(N, chi.conrey, H, sd, fexp, True)
            validate_record(rec)
            records.append(rec)

    lower = _dihedral_dim(dihedral_db, N, chi)
    if len(records) < lower:
        raise ArithmeticError(
            f"found {len(records)} forms at ({N}, {chi.conrey}) but dihedral "
            f"data promises {lower}")
    return records


def _next_prime(n: int) -> int:
    from .arithmetic import is_prime

    n += 1
    while not is_prime(n):
        n += 1
    return n
