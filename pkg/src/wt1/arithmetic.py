"""Elementary number theory used throughout the package.

Everything here is exact integer arithmetic.  Caches are insert-only and
keyed by immutable arguments, so results are stable across calls and
across processes given equal inputs.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Dict, Iterator, List, NamedTuple, Tuple


class NonResidueError(ArithmeticError):
    """Raised when a modular square root does not exist."""


# ---------------------------------------------------------------------------
# primes and factorisation


_SPF_LIMIT = 0
_SPF: "list[int]" = []


def _ensure_spf(limit: int) -> None:
    """Grow the smallest-prime-factor sieve to cover [0, limit]."""
    global _SPF_LIMIT, _SPF
    if limit <= _SPF_LIMIT:
        return
    limit = max(limit, 2 * _SPF_LIMIT, 1 << 10)
    spf = list(range(limit + 1))
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == p:
            for m in range(p * p, limit + 1, p):
                if spf[m] == m:
                    spf[m] = p
    _SPF = spf
    _SPF_LIMIT = limit


def smallest_prime_factor_table(limit: int) -> List[int]:
    """Return a smallest-prime-factor table covering 0..limit (shared, read-only)."""
    _ensure_spf(limit)
    return _SPF


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all 64-bit inputs."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(r - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_up_to(limit: int) -> List[int]:
    _ensure_spf(limit)
    return [p for p in range(2, limit + 1) if _SPF[p] == p]


def prime_iter(start: int = 2) -> Iterator[int]:
    """Yield primes >= start in increasing order."""
    n = max(2, start)
    while True:
        if is_prime(n):
            yield n
        n += 1 if n == 2 else 2 if n % 2 else 1


@lru_cache(maxsize=None)
def factorize(n: int) -> Tuple[Tuple[int, int], ...]:
    """Prime factorisation of |n| as a sorted tuple of (p, e) pairs."""
    n = abs(n)
    if n <= 1:
        return ()
    out: Dict[int, int] = {}
    if n < 1 << 22:
        _ensure_spf(n)
        while n > 1:
            p = _SPF[n]
            out[p] = out.get(p, 0) + 1
            n //= p
    else:
        d = 2
        while d * d <= n:
            while n % d == 0:
                out[d] = out.get(d, 0) + 1
                n //= d
            d += 1 if d == 2 else 2
        if n > 1:
            out[n] = out.get(n, 0) + 1
    return tuple(sorted(out.items()))


def prime_divisors(n: int) -> List[int]:
    return [p for p, _ in factorize(n)]


def valuation(n: int, p: int) -> int:
    """Largest e with p^e | n.  valuation(0, p) raises."""
    if n == 0:
        raise ValueError("valuation of 0 is undefined")
    n = abs(n)
    e = 0
    while n % p == 0:
        n //= p
        e += 1
    return e


@lru_cache(maxsize=None)
def divisors(n: int) -> Tuple[int, ...]:
    """All positive divisors of n, sorted."""
    out = [1]
    for p, e in factorize(n):
        out = [d * p**k for d in out for k in range(e + 1)]
    return tuple(sorted(out))


def num_divisors(n: int) -> int:
    r = 1
    for _, e in factorize(n):
        r *= e + 1
    return r


def euler_phi(n: int) -> int:
    r = abs(n)
    if r == 0:
        return 0
    for p, _ in factorize(n):
        r = r // p * (p - 1)
    return r


def mobius(n: int) -> int:
    fac = factorize(n)
    if any(e > 1 for _, e in fac):
        return 0
    return -1 if len(fac) % 2 else 1


def divisor_sigma(n: int) -> int:
    """Sum of positive divisors."""
    r = 1
    for p, e in factorize(n):
        r *= (p ** (e + 1) - 1) // (p - 1)
    return r


def multiplicative_basics(n: int) -> Tuple[int, int, int]:
    """(phi, mu, sigma) of n in one factorisation pass."""
    return euler_phi(n), mobius(n), divisor_sigma(n)


# ---------------------------------------------------------------------------
# Kronecker symbol


def kronecker(a: int, n: int) -> int:
    """Kronecker symbol (a|n), defined for all integers n."""
    if n == 0:
        return 1 if a in (1, -1) else 0
    sign = 1
    if n < 0:
        n = -n
        if a < 0:
            sign = -1
    # (a|2) component
    t = 0
    while n % 2 == 0:
        n //= 2
        t += 1
    if t:
        if a % 2 == 0:
            return 0
        if t % 2 and a % 8 in (3, 5):
            sign = -sign
    a %= n
    # Jacobi symbol (a|n) for odd n >= 1 by reciprocity
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                sign = -sign
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            sign = -sign
        a %= n
    return sign if n == 1 else 0


# ---------------------------------------------------------------------------
# discriminants and class numbers


class DiscriminantSplit(NamedTuple):
    d: int
    ell: int


class ClassData(NamedTuple):
    h: int
    w: int


def is_fundamental_discriminant(d: int) -> bool:
    if d == 1:
        return True
    if d == 0:
        return False
    if d % 4 == 1:
        return all(e == 1 for _, e in factorize(d))
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and all(e == 1 for _, e in factorize(m))
    return False


def split_discriminant(D: int) -> DiscriminantSplit:
    """Write D = d * ell^2 with d a fundamental discriminant.

    Requires D = 0 or 1 (mod 4) and D != 0.
    """
    if D == 0 or D % 4 not in (0, 1):
        raise ValueError(f"{D} is not a discriminant")
    core = -1 if D < 0 else 1
    f = 1
    for p, e in factorize(D):
        if e % 2:
            core *= p
        f *= p ** (e // 2)
    if core % 4 == 1:
        d, ell = core, f
    else:
        # core = 2,3 mod 4: the fundamental part is 4*core and f is even
        d, ell = 4 * core, f // 2
    assert d * ell * ell == D and is_fundamental_discriminant(d)
    return DiscriminantSplit(d, ell)


_CLASS_CACHE: Dict[int, ClassData] = {}


def class_data(d: int) -> ClassData:
    """Class number h(d) and unit count w(d) for a fundamental d < 0.

    h counts reduced integral binary quadratic forms (a, b, c) of
    discriminant d: b^2 - 4ac = d, |b| <= a <= c, with b >= 0 whenever
    |b| = a or a = c.  w = 6 for d = -3, 4 for d = -4, 2 otherwise.
    """
    got = _CLASS_CACHE.get(d)
    if got is not None:
        return got
    if d >= 0 or not is_fundamental_discriminant(d):
        raise ValueError(f"{d} is not a negative fundamental discriminant")
    h = 0
    a = 1
    while 3 * a * a <= -d:
        # b runs over 0 <= b <= a with b = d (mod 2)
        for b in range(d % 2, a + 1, 2):
            num = b * b - d
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a:
                continue
            h += 1 if (b == 0 or b == a or a == c) else 2
        a += 1
    w = 6 if d == -3 else 4 if d == -4 else 2
    out = ClassData(h, w)
    _CLASS_CACHE[d] = out
    return out


# ---------------------------------------------------------------------------
# square roots modulo prime powers


def _sqrt_mod_prime(a: int, p: int) -> int:
    """Tonelli-Shanks.  Requires p odd prime, a a quadratic residue mod p."""
    a %= p
    if a == 0:
        return 0
    if p % 4 == 3:
        return pow(a, (p + 1) // 4, p)
    # write p - 1 = q * 2^s
    q, s = p - 1, 0
    while q % 2 == 0:
        q //= 2
        s += 1
    z = 2
    while kronecker(z, p) != -1:
        z += 1
    m, c, t, r = s, pow(z, q, p), pow(a, q, p), pow(a, (q + 1) // 2, p)
    while t != 1:
        t2, i = t * t % p, 1
        while t2 != 1:
            t2 = t2 * t2 % p
            i += 1
        b = pow(c, 1 << (m - i - 1), p)
        m, c = i, b * b % p
        t, r = t * c % p, r * b % p
    return r


def sqrt_mod_prime_power(d: int, ell: int, p: int, e: int) -> int:
    """A residue u with u^2 = ell^2 * d modulo p^e (modulo 2^(e+2) when p = 2).

    d must be an invertible square in the relevant p-adic sense: a
    quadratic residue mod p for odd p, or 1 mod 8 for p = 2.  ell may be
    divisible by p.  The returned root is normalised to min(u, mod - u).
    """
    if e < 0:
        raise ValueError("negative exponent")
    exp = e + 2 if p == 2 else e
    mod = p**exp
    if mod == 1:
        return 0
    if p == 2:
        if d % 8 != 1:
            raise NonResidueError(f"{d} is not a square in Z_2")
        s = 1
        k = 3
        while k < exp:
            if (s * s - d) % (1 << (k + 1)):
                s += 1 << (k - 1)
            k += 1
        s %= mod
    else:
        if d % p == 0 or kronecker(d, p) != 1:
            raise NonResidueError(f"{d} is not an invertible square mod {p}")
        s = _sqrt_mod_prime(d, p)
        # Hensel: double the precision each round
        pk = p
        while pk < mod:
            pk = min(pk * pk, mod)
            s = (s - (s * s - d) * pow(2 * s, -1, pk)) % pk
    u = ell * s % mod
    return min(u, (mod - u) % mod)


# ---------------------------------------------------------------------------
# modular form bounds and index


def level_index(N: int) -> int:
    """Index of the level-N congruence subgroup: N * prod_{p|N} (1 + 1/p)."""
    m = N
    for p, _ in factorize(N):
        m = m // p * (p + 1)
    return m


def sturm_bound(N: int, k: int) -> int:
    """floor(k * m / 12) with m the level index; coefficient index bound."""
    return k * level_index(N) // 12


# ---------------------------------------------------------------------------
# prime selection for the residue field


def least_prime_not_dividing(N: int) -> int:
    for p in prime_iter():
        if N % p:
            return p
    raise AssertionError("unreachable")


def least_prime_in_progression(H: int, avoid: int = 1) -> int:
    """Least prime q = 1 (mod H) with q not dividing `avoid`."""
    q = H + 1
    while True:
        if is_prime(q) and avoid % q:
            return q
        q += H
