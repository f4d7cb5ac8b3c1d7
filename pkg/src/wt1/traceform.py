"""Trace forms of twisted newspace constituents at weight 2.

The weight-2 ambient space with trivial nebentypus decomposes into
pieces indexed by pairs (inner level M | N, twisting character psi)
subject to p-adic valuation constraints.  Each pair orbit carries a
polynomial q-series, the trace form, whose coefficients come out of a
closed formula with the usual four shapes of contribution: an identity
term over square indices, an elliptic term summing class numbers over
t^2 < 4n, a hyperbolic term over divisors of n, and a unipotent term.

Everything is computed with exact rational cyclotomic arithmetic.  A
coefficient is only released after its denominator is proven to be 1,
which catches transcription slips in the many-branch local factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Optional, Tuple, Union

from wt1.arithmetic import (
    class_data,
    divisor_sigma,
    divisors,
    euler_phi,
    factorize,
    kronecker,
    mobius,
    prime_divisors,
    split_discriminant,
    sqrt_mod_prime_power,
    valuation,
)
from wt1.characters import CharacterOrbit, DirichletCharacter, local_twist_minimal
from wt1.cyclotomic import CyclotomicInteger, reduce_zeta_fractions

# exponent -> Fraction, a rational element of the group ring of <zeta_r>
_Terms = Dict[int, Fraction]
_Factor = Union[Fraction, "_Terms"]

_ZERO = Fraction(0)

# count of coefficients actually computed (cache misses); lets callers
# prove that a warm cache did no re-derivation
_COEFF_COMPUTATIONS = 0

def coefficient_computations() -> int:
    return _COEFF_COMPUTATIONS


def reset_coefficient_computations() -> None:
    global _COEFF_COMPUTATIONS
    _COEFF_COMPUTATIONS = 0


# ---------------------------------------------------------------------------
# twist pairs


@dataclass(frozen=True)
class TwistPair:
    """A divisor M of N together with a primitive twisting character."""

    level: int
    inner_level: int
    twist: DirichletCharacter  # stored primitive (modulus = conductor)

    def is_valid(self) -> bool:
        N, M, psi = self.level, self.inner_level, self.twist
        if N % M or psi.modulus != psi.conductor:
            return False
        f = psi.conductor
        primes = {p for p, _ in factorize(N)} | {p for p, _ in factorize(f)}
        for p in sorted(primes):
            eN = valuation(N, p) if N % p == 0 else 0
            eM = valuation(M, p) if M % p == 0 else 0
            fp = valuation(f, p) if f % p == 0 else 0
            loc = psi.local_component(p)
            if loc.is_trivial():
                # untwisted prime: carries its full level, which must not be
                # lowerable by any further local twist
                if eM != eN or not local_twist_minimal(p, eN, 0, 1):
                    return False
                continue
            if eN != 2 * fp or eM >= eN:
                return False
            # the inner character (conjugate of psi^2 locally) must live at
            # the inner level and itself sit at minimal level there
            sq = loc**2
            s = valuation(sq.conductor, p) if sq.conductor % p == 0 else 0
            if not local_twist_minimal(p, eM, s, sq.order):
                return False
        return True


@dataclass(frozen=True)
class TwistPairOrbit:
    """All Galois conjugates of a twist pair, acting as one rational object."""

    level: int
    inner_level: int
    orbit: CharacterOrbit  # orbit of the primitive twisting character

    @property
    def order(self) -> int:
        return self.orbit.order

    @property
    def representative(self) -> TwistPair:
        return TwistPair(self.level, self.inner_level, self.orbit.representative)


@lru_cache(maxsize=None)
def _primitive_characters(modulus: int) -> Tuple[DirichletCharacter, ...]:
    from wt1.characters import all_characters

    return tuple(c for c in all_characters(modulus) if c.is_primitive())


@lru_cache(maxsize=None)
def _local_pair_options(p: int, eN: int) -> Tuple[Tuple[int, Optional[DirichletCharacter]], ...]:
    """Compatible (valuation of inner level, local twist) choices at one prime.

    Leaving the prime untwisted keeps its whole level, allowed only when that
    local level is already minimal.  A nontrivial local twist needs the level
    to be twice its conductor, and admits every strictly smaller inner
    valuation at which the squared twist lives and is itself minimal.
    """
    opts: List[Tuple[int, Optional[DirichletCharacter]]] = []
    if local_twist_minimal(p, eN, 0, 1):
        opts.append((eN, None))
    if eN % 2 == 0 and eN >= 2:
        fp = eN // 2
        for psi in _primitive_characters(p**fp):
            sq = psi**2
            s = valuation(sq.conductor, p) if sq.conductor % p == 0 else 0
            for j in range(eN):
                if local_twist_minimal(p, j, s, sq.order):
                    opts.append((j, psi))
    return tuple(opts)


def enumerate_twist_pairs(N: int) -> List[TwistPair]:
    """Every valid pair at level N, orbit members adjacent, deterministic order."""
    fac = factorize(N)
    per_prime = [_local_pair_options(p, e) for p, e in fac]
    pairs: List[TwistPair] = []
    for combo in _product(per_prime):
        M = 1
        chosen: List[DirichletCharacter] = []
        for (p, _), (j, loc) in zip(fac, combo):
            M *= p**j
            if loc is not None:
                chosen.append(loc)
        modulus = math.prod(c.modulus for c in chosen) if chosen else 1
        exps = {}
        for c in chosen:
            p = factorize(c.modulus)[0][0]
            exps[p] = c._exps_map()[p]
        psi = DirichletCharacter(modulus, exps)
        pairs.append(TwistPair(N, M, psi))
    pairs.sort(key=lambda t: (t.inner_level, t.twist.conductor, _orbit_min_conrey(t.twist), t.twist.conrey))
    return pairs


def _product(options):
    if not options:
        yield ()
        return
    head, *tail = options
    for h in head:
        for rest in _product(tail):
            yield (h,) + rest


def _orbit_min_conrey(chi: DirichletCharacter) -> int:
    N = chi.modulus
    if N == 1:
        return 1
    m, r = chi.conrey, chi.order
    return min(pow(m, a, N) for a in range(1, r + 1) if math.gcd(a, r) == 1)


def twist_pair_orbits(N: int) -> List[TwistPairOrbit]:
    """Valid pairs at level N grouped under the Galois action, deterministically ordered."""
    out: List[TwistPairOrbit] = []
    seen = set()
    for pair in enumerate_twist_pairs(N):
        psi = pair.twist
        f, r = psi.modulus, psi.order
        members = (
            tuple(sorted({pow(psi.conrey, a, f) for a in range(1, r + 1) if math.gcd(a, r) == 1}))
            if f > 1
            else (1,)
        )
        key = (pair.inner_level, f, members)
        if key in seen:
            continue
        seen.add(key)
        out.append(TwistPairOrbit(N, pair.inner_level, CharacterOrbit(f, r, members)))
    return out


# ---------------------------------------------------------------------------
# rational group-ring helpers


def _as_terms(x: _Factor) -> _Terms:
    if isinstance(x, dict):
        return x
    return {0: x} if x else {}


def _terms_mul(a: _Terms, b: _Terms, r: int) -> _Terms:
    out: _Terms = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = (ka + kb) % r
            nv = out.get(k, _ZERO) + va * vb
            if nv:
                out[k] = nv
            elif k in out:
                del out[k]
    return out


def _terms_add_scaled(acc: _Terms, b: _Terms, scale: Fraction, r: int) -> None:
    for k, v in b.items():
        k %= r
        nv = acc.get(k, _ZERO) + scale * v
        if nv:
            acc[k] = nv
        elif k in acc:
            del acc[k]


# ---------------------------------------------------------------------------
# local elliptic factors


def _re_exponent_terms(chi: DirichletCharacter, x: int, r: int) -> Dict[int, int]:
    """chi(x) + chi(x^{-1}) as zeta_r exponent terms; empty when x is not a unit."""
    prim = chi.primitive()
    f = prim.modulus
    if f > 1 and math.gcd(x, f) != 1:
        return {}
    j, rp = prim.evaluate(x)
    j = j * (r // rp) % r
    out = {j: 1}
    k = (-j) % r
    out[k] = out.get(k, 0) + 1
    return out


def _character_argument(t: int, n: int, p: int, e: int, d: int, ell: int) -> int:
    """The residue t(t+u)/(2n) - 1 with u = ell*sqrt(d), reduced mod p^(e+2).

    The square root is taken with extra headroom so shared powers of p
    cancel exactly before the modular inversion; the result is well
    defined modulo any character conductor dividing p^e.
    """
    u = sqrt_mod_prime_power(d, ell, p, e + 3)
    num = t * (t + u) - 2 * n
    den = 2 * n
    if num == 0:
        return 0
    c = valuation(den, p) if den % p == 0 else 0
    if c:
        if num % p**c:
            raise RuntimeError("character argument is not a p-adic integer; formula bug")
        num //= p**c
        den //= p**c
    mod = p ** (e + 2)
    return num * pow(den, -1, mod) % mod


def _local_elliptic_generic(p: int, d: int, ell: int) -> Fraction:
    """Factor at a prime of ell away from the inner level (trivial character)."""
    lp = valuation(ell, p)
    return Fraction(p**lp) + (1 - kronecker(d, p)) * Fraction(p**lp - 1, p - 1)


def _local_minimal_odd(
    p: int, e: int, s: int, psi_p: DirichletCharacter, t: int, n: int, d: int, ell: int, v: int, r: int
) -> _Factor:
    dp = kronecker(d, p)
    lp = valuation(ell, p) if ell % p == 0 else 0
    if s > 0:
        if v >= 2 * e - 1:
            return 2 * Fraction(p**lp) + (1 - dp) * Fraction(2 * p**lp - p**e - p ** (e - 1), p - 1)
        if dp != 1:
            return _ZERO
        x = _character_argument(t, n, p, e, d, ell)
        re = _re_exponent_terms(psi_p, x, r)
        return {k: Fraction(c * p**lp) for k, c in re.items()}
    if psi_p.conductor % p == 0:
        return Fraction((dp - 1) * kronecker(n, p))
    if v >= e - 2:
        if e != 1 and kronecker(n, p) != 1:
            return _ZERO
        bracket = (
            (1 if e > 2 else 0)
            + p * ((1 if e == 2 else 0) + (1 if (e % 2 == 0 and v == e - 2) else 0) - (p if v >= e - 1 else 0))
        )
        return (1 - dp) * Fraction(p) ** (e - 3) / math.gcd(2, e) * bracket
    return _ZERO


def _local_minimal_two_full(
    e: int, psi_2: DirichletCharacter, t: int, n: int, d: int, ell: int, v: int, r: int
) -> _Factor:
    """p = 2 when the squared twist has conductor exactly 2^e."""
    d2 = kronecker(d, 2)
    l2 = valuation(ell, 2) if ell % 2 == 0 else 0
    if v >= 2 * e:
        main = (2 ** (v // 2 + 1) - 3 * 2 ** (e - 1)) * (1 - d2) + (2 ** (l2 + 1) if d % 2 else 0)
        return Fraction(main * (1 - (2 if v == 2 * e else 0)))
    # v = 2e-1 lands here too: d is then even, d2 is 0, and the class is
    # dropped, as pinned against independent newspace traces
    if d2 != 1:
        return _ZERO
    x = _character_argument(t, n, 2, e, d, ell)
    re = _re_exponent_terms(psi_2, x, r)
    return {k: Fraction(c << l2) for k, c in re.items()}


def _local_minimal_two_small(
    e: int, s: int, psi_2: DirichletCharacter, n: int, d: int, v: int
) -> Fraction:
    """p = 2 when the squared twist drops conductor (covers a trivial twist too)."""
    d2 = kronecker(d, 2)
    pref = Fraction((1 - d2) * (2 ** (e - 3) if e >= 3 else 1))
    if not pref:
        return _ZERO
    d_sign = 1 if d % 2 == 0 else -1
    if s == 0:
        # the twist is quadratic or absent, so the factor is the untwisted
        # local value times the twist at n, uniformly over the v cases; this
        # matches the analogous quadratic row of the odd-prime block
        tw = _quadratic_value(psi_2, n)
        if not tw:
            return _ZERO
        if v > e >= 3:
            return pref * tw * -3
        if v in (e, e - 1) and e >= 3:
            return pref * tw * (2 * d_sign - 1)
        if e in (1, 2):
            delta = Fraction(3, 2) if (e == 2 and v == 0) else _ZERO
            return pref * tw * (delta - 1)
        return _ZERO
    if v > e >= 3:
        return pref * -3
    if v == e:
        return pref * ((-1) ** e + 2)
    if v == e - 1 and v % 2 == 0:
        # for odd v the discriminant has 2-valuation exactly 3 and the
        # class drops out; pinned against independent newspace traces
        return pref * (1 - 2 * d_sign)
    return _ZERO


def _quadratic_value(chi: DirichletCharacter, n: int) -> int:
    """chi(n) for a character of order at most 2, as a plain integer."""
    v = chi.primitive().evaluate(n)
    if v is None:
        return 0
    j, r = v
    assert r <= 2, "expected a real character here"
    return -1 if j else 1


def local_factor(p: int, pair: TwistPair, t: int, n: int) -> CyclotomicInteger:
    """One prime's factor inside the elliptic term, as an exact cyclotomic integer."""
    disc = split_discriminant(t * t - 4 * n)
    d, ell = disc.d, disc.ell
    psi = pair.twist
    r = psi.order
    M = pair.inner_level
    if M % p == 0:
        e = valuation(M, p)
        v = valuation(4 * n - t * t, p) if (4 * n - t * t) % p == 0 else 0
        psi_p = psi.local_component(p)
        sq_cond = (psi_p**2).conductor
        s = valuation(sq_cond, p) if sq_cond % p == 0 else 0
        if p == 2:
            val = (
                _local_minimal_two_full(e, psi_p, t, n, d, ell, v, r)
                if s == e
                else _local_minimal_two_small(e, s, psi_p, n, d, v)
            )
        else:
            val = _local_minimal_odd(p, e, s, psi_p, t, n, d, ell, v, r)
    elif ell % p == 0:
        val = _local_elliptic_generic(p, d, ell)
    else:
        raise ValueError("prime is neither in the inner level nor in ell")
    coeffs = reduce_zeta_fractions(_as_terms(val), r)
    return CyclotomicInteger(r, coeffs)


# ---------------------------------------------------------------------------
# the coefficient formula


def _zero(r: int) -> CyclotomicInteger:
    return CyclotomicInteger.from_int(r, 0)


def trace_coeff_fractions(pair_orbit: TwistPairOrbit, n: int) -> List[Fraction]:
    """n-th trace-form coefficient as raw rationals on the power basis.

    Valid pairs always produce integers; `trace_coeff` rejects anything
    fractional, so a slip in a local-factor branch cannot leak through.
    """
    global _COEFF_COMPUTATIONS
    _COEFF_COMPUTATIONS += 1
    N, M = pair_orbit.level, pair_orbit.inner_level
    psi = pair_orbit.orbit.representative
    r = pair_orbit.order
    if n < 1:
        raise ValueError("coefficient index must be positive")

    zero = [Fraction(0)] * len(_zero(r).coeffs)
    for p in prime_divisors(math.gcd(n, N)):
        if valuation(N, p) >= 2:
            return zero

    # character prefactor over primes of the conductor away from M
    pref_exp = 0
    for p in prime_divisors(psi.conductor):
        if M % p:
            jp = psi.local_component(p).value_exponent(n, r)
            if jp is None:
                return zero
            pref_exp += jp
    pref_exp %= r

    local: List[Tuple[int, int, int, DirichletCharacter]] = []
    for p, e in factorize(M):
        psi_p = psi.local_component(p)
        sq_cond = (psi_p**2).conductor
        s = valuation(sq_cond, p) if sq_cond % p == 0 else 0
        local.append((p, e, s, psi_p))

    identity = _identity_term(n, local)
    elliptic = _elliptic_term(n, M, local, r)
    hyperbolic = _hyperbolic_term(n, local, r)
    unipotent = _unipotent_term(n, M, psi)

    total: _Terms = {}
    _terms_add_scaled(total, {0: identity + unipotent}, Fraction(1), r)
    _terms_add_scaled(total, elliptic, Fraction(-1), r)
    _terms_add_scaled(total, hyperbolic, Fraction(-1), r)
    if pref_exp:
        total = {(k + pref_exp) % r: v for k, v in total.items()}
    return reduce_zeta_fractions(total, r)


def trace_coeff(pair_orbit: TwistPairOrbit, n: int) -> CyclotomicInteger:
    """n-th trace-form coefficient over the orbit's cyclotomic field."""
    coeffs = trace_coeff_fractions(pair_orbit, n)
    for c in coeffs:
        if c.denominator != 1:
            raise ArithmeticError(
                f"non-integral trace coefficient at N={pair_orbit.level}, "
                f"M={pair_orbit.inner_level}, "
                f"psi={pair_orbit.orbit.representative.conrey}, n={n}: {coeffs}"
            )
    return CyclotomicInteger(pair_orbit.order, [int(c) for c in coeffs])


def _identity_term(n: int, local) -> Fraction:
    root = math.isqrt(n)
    if root * root != n:
        return _ZERO
    out = Fraction(1, 12)
    for p, e, s, _ in local:
        if s == e:
            out *= p**e + p ** (e - 1)
        else:
            num = euler_phi(p ** (e - 2)) if e >= 2 else 1
            den = 2 if (e % 2 == 0 and p > 2) else 1
            tail = 1 + (p if e > 1 else 0) - (2 if e == 2 else 0)
            out *= Fraction(num * (p - 1) * tail, den)
    return out


def _elliptic_term(n: int, M: int, local, r: int) -> _Terms:
    acc: _Terms = {}
    tmax = math.isqrt(4 * n - 1)
    for t in range(-tmax, tmax + 1):
        disc = split_discriminant(t * t - 4 * n)
        d, ell = disc.d, disc.ell
        h, w = class_data(d)
        term: _Terms = {0: Fraction(h, w)}
        for p in prime_divisors(ell):
            if M % p:
                term = _terms_mul(term, {0: _local_elliptic_generic(p, d, ell)}, r)
                if not term:
                    break
        if not term:
            continue
        dead = False
        for p, e, s, psi_p in local:
            v = valuation(4 * n - t * t, p) if (4 * n - t * t) % p == 0 else 0
            if p == 2:
                val = (
                    _local_minimal_two_full(e, psi_p, t, n, d, ell, v, r)
                    if s == e
                    else _local_minimal_two_small(e, s, psi_p, n, d, v)
                )
            else:
                val = _local_minimal_odd(p, e, s, psi_p, t, n, d, ell, v, r)
            factor = _as_terms(val)
            if not factor:
                dead = True
                break
            term = _terms_mul(term, factor, r)
        if dead or not term:
            continue
        _terms_add_scaled(acc, term, Fraction(1), r)
    return acc


def _hyperbolic_term(n: int, local, r: int) -> _Terms:
    if any(s != e for _, e, s, _ in local):
        return {}
    acc: _Terms = {}
    for d in divisors(n):
        if d * d > n:
            break
        weight = Fraction(d, 2) if d * d == n else Fraction(d)
        term: _Terms = {0: weight}
        for p, e, s, psi_p in local:
            c = psi_p.conductor
            x = d * d % c * pow(n % c, -1, c) % c if c > 1 else 1
            re = _re_exponent_terms(psi_p, x, r)
            if not re:
                term = {}
                break
            term = _terms_mul(term, {k: Fraction(v) for k, v in re.items()}, r)
        _terms_add_scaled(acc, term, Fraction(1), r)
    return acc


def _unipotent_term(n: int, M: int, psi: DirichletCharacter) -> Fraction:
    if psi.order > 2:
        return _ZERO
    out = Fraction(mobius(M))
    if not out:
        return _ZERO
    # twist evaluation at primes the inner level shares with the conductor;
    # the coprime part is applied once for the whole coefficient upstream
    for p in prime_divisors(math.gcd(M, psi.conductor)):
        out *= _quadratic_value(psi.local_component(p), n)
    for p, e in factorize(n):
        if M % p:
            out *= divisor_sigma(p**e)
    return out


# ---------------------------------------------------------------------------
# trace forms as reusable objects


class TraceForm:
    """Lazily computed coefficient vector of one pair orbit's trace form."""

    def __init__(self, pair_orbit: TwistPairOrbit):
        self.pair_orbit = pair_orbit
        self.order = pair_orbit.order
        self._coeffs: Dict[int, CyclotomicInteger] = {}
        self.max_index_requested = 0

    @property
    def level(self) -> int:
        return self.pair_orbit.level

    @property
    def inner_level(self) -> int:
        return self.pair_orbit.inner_level

    def coeff(self, n: int) -> CyclotomicInteger:
        if n > self.max_index_requested:
            self.max_index_requested = n
        got = self._coeffs.get(n)
        if got is None:
            got = trace_coeff(self.pair_orbit, n)
            self._coeffs[n] = got
        return got

    def coeff_vector(self, max_n: int) -> List[CyclotomicInteger]:
        return [self.coeff(n) for n in range(1, max_n + 1)]

    @property
    def dimension(self) -> int:
        c = self.coeff(1)
        if any(c.coeffs[1:]) or c.coeffs[0] < 0:
            raise ArithmeticError(f"leading trace coefficient is not a non-negative integer: {c}")
        return c.coeffs[0]


def hecke_on_traceform(form: TraceForm, b: int, max_n: int) -> List[CyclotomicInteger]:
    """Coefficients 1..max_n of the b-th Hecke translate of the trace form.

    The ambient space has trivial nebentypus, so the character weight on
    the divisor sum is just the coprimality indicator against the level.
    """
    N = form.level
    out = []
    for n in range(1, max_n + 1):
        acc = _zero(form.order)
        for delta in divisors(math.gcd(n, b)):
            if math.gcd(delta, N) == 1:
                acc = acc + delta * form.coeff(n * b // (delta * delta))
        out.append(acc)
    return out
