"""Exact cyclotomic integers and their projection to a prime residue field.

Elements of Z[zeta_n] are stored on the power basis 1, zeta, ...,
zeta^(phi(n)-1), reduced modulo the n-th cyclotomic polynomial.  All
coefficients are Python ints, so nothing here ever rounds.

For hot paths the package also passes around *sparse* sums of roots of
unity as plain ``{exponent: coefficient}`` dicts; see the ``zsum_*``
helpers at the bottom.  A dict is cheaper than the dense form whenever
an element is a short combination of roots of unity, which is the
normal case for eigenform coefficients.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterable, List, Tuple

from wt1.arithmetic import euler_phi, factorize, is_prime, least_prime_in_progression


class LiftError(ArithmeticError):
    """A residue is not in the image of the projected root-of-unity group."""


def _as_int(x) -> int:
    i = int(x)
    if i != x:
        raise ValueError(f"non-integral cyclotomic coefficient {x!r}")
    return i


@lru_cache(maxsize=None)
def cyclotomic_polynomial(n: int) -> Tuple[int, ...]:
    """Coefficients of Phi_n, low degree first, leading coefficient 1."""
    if n == 1:
        return (-1, 1)
    # start from x^n - 1 and divide off Phi_d for proper divisors d
    poly = [-1] + [0] * (n - 1) + [1]
    for d in range(1, n):
        if n % d:
            continue
        q = list(cyclotomic_polynomial(d))
        # exact polynomial division, q is monic
        deg_q = len(q) - 1
        out = [0] * (len(poly) - deg_q)
        rem = list(poly)
        for i in range(len(out) - 1, -1, -1):
            c = rem[i + deg_q]
            out[i] = c
            if c:
                for j, qc in enumerate(q):
                    rem[i + j] -= c * qc
        assert not any(rem[:deg_q]), "cyclotomic division left a remainder"
        poly = out
    return tuple(poly)


@lru_cache(maxsize=None)
def _reduction_rows(n: int) -> Tuple[Tuple[int, ...], ...]:
    """Power-basis expansion of zeta_n^k for every k in [0, n)."""
    phi = euler_phi(n)
    poly = cyclotomic_polynomial(n)
    rows: List[Tuple[int, ...]] = []
    for k in range(phi):
        row = [0] * phi
        row[k] = 1
        rows.append(tuple(row))
    cur = list(rows[-1]) if phi else [0]
    for _ in range(phi, n):
        nxt = [0] * phi
        for i in range(phi - 1):
            nxt[i + 1] = cur[i]
        top = cur[phi - 1]
        if top:
            # zeta^phi = -(poly[0] + ... + poly[phi-1] x^(phi-1))
            for i in range(phi):
                nxt[i] -= top * poly[i]
        rows.append(tuple(nxt))
        cur = nxt
    return tuple(rows)


class CyclotomicInteger:
    """An element of Z[zeta_n] on the reduced power basis."""

    __slots__ = ("order", "coeffs")

    def __init__(self, order: int, coeffs: Iterable[int]):
        self.order = order
        c = tuple(_as_int(x) for x in coeffs)
        if len(c) != euler_phi(order):
            raise ValueError("coefficient vector has wrong length")
        self.coeffs = c

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_int(cls, order: int, value: int) -> "CyclotomicInteger":
        phi = euler_phi(order)
        return cls(order, (value,) + (0,) * (phi - 1))

    @classmethod
    def zeta_power(cls, order: int, k: int) -> "CyclotomicInteger":
        return cls(order, _reduction_rows(order)[k % order])

    @classmethod
    def from_zeta_terms(cls, order: int, terms: Dict[int, int]) -> "CyclotomicInteger":
        phi = euler_phi(order)
        rows = _reduction_rows(order)
        acc = [0] * phi
        for k, c in terms.items():
            if not c:
                continue
            row = rows[k % order]
            for i in range(phi):
                if row[i]:
                    acc[i] += c * row[i]
        return cls(order, acc)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other: "CyclotomicInteger") -> "CyclotomicInteger":
        a, b = _common_order(self, other)
        return CyclotomicInteger(a.order, tuple(x + y for x, y in zip(a.coeffs, b.coeffs)))

    def __sub__(self, other: "CyclotomicInteger") -> "CyclotomicInteger":
        a, b = _common_order(self, other)
        return CyclotomicInteger(a.order, tuple(x - y for x, y in zip(a.coeffs, b.coeffs)))

    def __neg__(self) -> "CyclotomicInteger":
        return CyclotomicInteger(self.order, tuple(-x for x in self.coeffs))

    def __mul__(self, other):
        if isinstance(other, int):
            return CyclotomicInteger(self.order, tuple(other * x for x in self.coeffs))
        a, b = _common_order(self, other)
        phi = len(a.coeffs)
        n = a.order
        rows = _reduction_rows(n)
        acc = [0] * phi
        for i, x in enumerate(a.coeffs):
            if not x:
                continue
            for j, y in enumerate(b.coeffs):
                if not y:
                    continue
                row = rows[(i + j) % n]
                v = x * y
                for t in range(phi):
                    if row[t]:
                        acc[t] += v * row[t]
        return CyclotomicInteger(a.order, acc)

    __rmul__ = __mul__

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def __eq__(self, other) -> bool:
        if isinstance(other, int):
            other = CyclotomicInteger.from_int(self.order, other)
        if not isinstance(other, CyclotomicInteger):
            return NotImplemented
        a, b = _common_order(self, other)
        return a.coeffs == b.coeffs

    def __hash__(self):
        return hash((self.order, self.coeffs))

    def __repr__(self):
        return f"CyclotomicInteger(order={self.order}, coeffs={self.coeffs})"

    # -- Galois and order changes -------------------------------------------

    def galois_map(self, a: int) -> "CyclotomicInteger":
        """Apply zeta -> zeta^a; a must be coprime to the order."""
        import math

        if math.gcd(a, self.order) != 1:
            raise ValueError("galois exponent not coprime to order")
        terms: Dict[int, int] = {}
        for k, c in enumerate(self.coeffs):
            if c:
                e = k * a % self.order
                terms[e] = terms.get(e, 0) + c
        return CyclotomicInteger.from_zeta_terms(self.order, terms)

    def conjugate(self) -> "CyclotomicInteger":
        return self.galois_map(self.order - 1) if self.order > 1 else self

    def change_order(self, new_order: int) -> "CyclotomicInteger":
        """Re-express in Z[zeta_m] where the current order divides m."""
        if new_order == self.order:
            return self
        if new_order % self.order:
            raise ValueError("new order must be a multiple of the old one")
        step = new_order // self.order
        terms: Dict[int, int] = {}
        for k, c in enumerate(self.coeffs):
            if c:
                terms[k * step] = terms.get(k * step, 0) + c
        return CyclotomicInteger.from_zeta_terms(new_order, terms)

    def shrink_order(self, new_order: int) -> "CyclotomicInteger":
        """Inverse of change_order when the element lies in the smaller ring."""
        if self.order % new_order:
            raise ValueError("new order must divide the old one")
        phi_new = euler_phi(new_order)
        # write each small basis vector in the big basis and solve the
        # resulting (injective) linear system exactly
        basis = [CyclotomicInteger.zeta_power(new_order, k).change_order(self.order) for k in range(phi_new)]
        target = list(self.coeffs)
        coeffs = [0] * phi_new
        # Gaussian elimination over Q with exact fractions
        mat = [[Fraction(b.coeffs[i]) for b in basis] for i in range(len(target))]
        vec = [Fraction(t) for t in target]
        piv_rows: List[int] = []
        col_of_row: Dict[int, int] = {}
        r = 0
        for col in range(phi_new):
            sel = None
            for row in range(len(vec)):
                if row in col_of_row:
                    continue
                if mat[row][col]:
                    sel = row
                    break
            if sel is None:
                continue
            col_of_row[sel] = col
            piv_rows.append(sel)
            inv = 1 / mat[sel][col]
            mat[sel] = [x * inv for x in mat[sel]]
            vec[sel] *= inv
            for row in range(len(vec)):
                if row != sel and mat[row][col]:
                    f = mat[row][col]
                    mat[row] = [x - f * y for x, y in zip(mat[row], mat[sel])]
                    vec[row] -= f * vec[sel]
        for row, col in col_of_row.items():
            coeffs[col] = vec[row]
        # consistency: residual rows must vanish
        for row in range(len(vec)):
            if row not in col_of_row and vec[row]:
                raise ValueError("element does not lie in the smaller cyclotomic ring")
        if any(c.denominator != 1 for c in coeffs):
            raise ValueError("element does not lie in the smaller cyclotomic ring")
        out = CyclotomicInteger(new_order, tuple(int(c) for c in coeffs))
        if out.change_order(self.order) != self:
            raise ValueError("element does not lie in the smaller cyclotomic ring")
        return out

    # -- numeric embedding ---------------------------------------------------

    def embed_complex(self, embedding: int = 1) -> complex:
        """Numeric value under zeta -> exp(2*pi*i*embedding/order)."""
        import cmath

        n = self.order
        return sum(
            c * cmath.exp(2j * cmath.pi * (k * embedding % n) / n)
            for k, c in enumerate(self.coeffs)
            if c
        )


def _common_order(a: CyclotomicInteger, b: CyclotomicInteger):
    if a.order == b.order:
        return a, b
    import math

    m = a.order * b.order // math.gcd(a.order, b.order)
    return a.change_order(m), b.change_order(m)


# ---------------------------------------------------------------------------
# projection to F_q


def _least_primitive_root(q: int) -> int:
    fac = [p for p, _ in factorize(q - 1)]
    g = 2
    while True:
        if all(pow(g, (q - 1) // p, q) != 1 for p in fac):
            return g
        g += 1


def choose_modular_prime(H: int, N: int) -> int:
    """Least prime q = 1 (mod H) with q not dividing N."""
    return least_prime_in_progression(H, avoid=N)


class ModularProjection:
    """Ring map sigma: Z[zeta_H] -> F_q, injective on the H-th roots of unity.

    q is the least prime q = 1 (mod H) coprime to the level, and zeta_H
    maps to g^((q-1)/H) for g the least primitive root mod q.  A hash of
    all H images makes root-of-unity lifting O(1).
    """

    __slots__ = ("H", "q", "generator", "image_of_zeta", "_zeta_pows", "_lift")

    def __init__(self, H: int, level: int = 1, q: int | None = None):
        self.H = H
        self.q = q if q is not None else choose_modular_prime(H, level)
        if q is not None and (not is_prime(q) or (q - 1) % H or level % q == 0):
            raise ValueError("q must be prime, 1 mod H, and coprime to the level")
        if self.q >= 1 << 31:
            raise ValueError("residue field too large for the dense kernels")
        self.generator = _least_primitive_root(self.q)
        self.image_of_zeta = pow(self.generator, (self.q - 1) // H, self.q)
        pows = [1] * H
        for j in range(1, H):
            pows[j] = pows[j - 1] * self.image_of_zeta % self.q
        self._zeta_pows = pows
        self._lift = {v: j for j, v in enumerate(pows)}
        assert len(self._lift) == H, "zeta image does not have exact order H"

    def zeta_power(self, j: int) -> int:
        return self._zeta_pows[j % self.H]

    def project(self, x: CyclotomicInteger) -> int:
        if self.H % x.order:
            raise ValueError("element order does not divide H")
        step = self.H // x.order
        q = self.q
        acc = 0
        for k, c in enumerate(x.coeffs):
            if c:
                acc += c * self._zeta_pows[k * step % self.H]
        return acc % q

    def lift_root_of_unity(self, value: int) -> int:
        """Exponent j with value = sigma(zeta_H)^j, else LiftError."""
        j = self._lift.get(value % self.q)
        if j is None:
            raise LiftError(f"{value} is not the image of an H-th root of unity")
        return j


# ---------------------------------------------------------------------------
# sparse root-of-unity sums


def zsum_scale(a: Dict[int, int], c) -> Dict[int, int]:
    return {k: c * v for k, v in a.items() if v}


def zsum_add(a: Dict[int, int], b: Dict[int, int], order: int) -> Dict[int, int]:
    out = dict(a)
    for k, v in b.items():
        k %= order
        nv = out.get(k, 0) + v
        if nv:
            out[k] = nv
        elif k in out:
            del out[k]
    return out


def zsum_mul(a: Dict[int, int], b: Dict[int, int], order: int) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for ka, va in a.items():
        if not va:
            continue
        for kb, vb in b.items():
            if not vb:
                continue
            k = (ka + kb) % order
            nv = out.get(k, 0) + va * vb
            if nv:
                out[k] = nv
            elif k in out:
                del out[k]
    return out


def zsum_project(a: Dict[int, int], proj: ModularProjection, order: int) -> int:
    if proj.H % order:
        raise ValueError("order does not divide H")
    step = proj.H // order
    acc = 0
    for k, v in a.items():
        if v:
            acc += v * proj.zeta_power(k * step)
    return acc % proj.q


def zsum_to_cyclo(a: Dict[int, int], order: int) -> CyclotomicInteger:
    return CyclotomicInteger.from_zeta_terms(order, a)


def reduce_zeta_fractions(terms: Dict[int, Fraction], order: int) -> List[Fraction]:
    """Reduce a rational root-of-unity sum to the power basis, keeping Fractions."""
    phi = euler_phi(order)
    rows = _reduction_rows(order)
    acc = [Fraction(0)] * phi
    for k, c in terms.items():
        if c:
            row = rows[k % order]
            for i in range(phi):
                if row[i]:
                    acc[i] += c * row[i]
    return acc
