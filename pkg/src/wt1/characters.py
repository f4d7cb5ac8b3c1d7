"""Dirichlet characters with exact root-of-unity values.

A character mod N is stored by its exponents on a fixed set of
generators of (Z/N)^*, one block per prime power in N:

* odd p^e: the smallest integer that is a primitive root mod both
  p and p^2 (hence mod every p^e);
* 2: trivial group;  4: generated by 3;  2^e, e >= 3: generated by
  -1 and 5, of orders 2 and 2^(e-2).

This is the labelling scheme used by the LMFDB, so ``conrey`` /
``from_conrey`` agree with published tables.  Values are returned as
exponent pairs (j, r) meaning e^(2*pi*i*j/r) with r the character
order; nothing is ever a float.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

from wt1.arithmetic import euler_phi, factorize, valuation
from wt1.cyclotomic import CyclotomicInteger

# local generator data per prime power: (gens, orders)
_LocalGens = Tuple[Tuple[int, ...], Tuple[int, ...]]


@lru_cache(maxsize=None)
def _local_generators(p: int, e: int) -> _LocalGens:
    pe = p**e
    if p == 2:
        if e == 1:
            return (), ()
        if e == 2:
            return (3,), (2,)
        return (pe - 1, 5), (2, 1 << (e - 2))
    g = _conrey_generator(p)
    return (g,), (euler_phi(pe),)


@lru_cache(maxsize=None)
def _conrey_generator(p: int) -> int:
    """Smallest primitive root mod p that stays primitive mod p^2."""
    fac = [r for r, _ in factorize(p - 1)]
    g = 2
    while True:
        if all(pow(g, (p - 1) // r, p) != 1 for r in fac):
            if pow(g, p - 1, p * p) != 1:
                return g
            # g lifts badly; g + p is then a primitive root mod p^2
            return g + p
        g += 1


@lru_cache(maxsize=None)
def _dlog_table(p: int, e: int) -> Dict[int, Tuple[int, ...]]:
    """residue mod p^e -> exponent vector on the canonical generators."""
    pe = p**e
    gens, orders = _local_generators(p, e)
    table: Dict[int, Tuple[int, ...]] = {}
    if not gens:
        table[1 % pe] = ()
        return table
    if len(gens) == 1:
        g, n = gens[0], orders[0]
        x = 1
        for k in range(n):
            table[x] = (k,)
            x = x * g % pe
    else:
        gm, gf = gens
        nm, nf = orders
        for a in range(nm):
            base = pow(gm, a, pe)
            x = base
            for b in range(nf):
                table[x] = (a, b)
                x = x * gf % pe
    return table


class DirichletCharacter:
    """A character of (Z/N)^* with values in the roots of unity."""

    __slots__ = ("modulus", "_local", "_order", "_conductor", "_value_cache")

    def __init__(self, modulus: int, local_exponents: Dict[int, Tuple[int, ...]]):
        """local_exponents maps each prime of the modulus to generator exponents."""
        self.modulus = modulus
        fac = factorize(modulus)
        local: List[Tuple[int, int, Tuple[int, ...], Tuple[int, ...]]] = []
        for p, e in fac:
            gens, orders = _local_generators(p, e)
            exps = tuple(local_exponents.get(p, (0,) * len(gens)))
            if len(exps) != len(gens):
                raise ValueError(f"wrong exponent count at p={p}")
            exps = tuple(k % n for k, n in zip(exps, orders))
            local.append((p, e, exps, orders))
        self._local = tuple(local)
        self._order: Optional[int] = None
        self._conductor: Optional[int] = None
        self._value_cache: Dict[int, Optional[Tuple[int, int]]] = {}

    # -- constructors -------------------------------------------------------

    @classmethod
    def trivial(cls, modulus: int) -> "DirichletCharacter":
        return cls(modulus, {})

    @classmethod
    def from_conrey(cls, modulus: int, index: int) -> "DirichletCharacter":
        if modulus == 1:
            return cls(1, {})
        index %= modulus
        if math.gcd(index, modulus) != 1:
            raise ValueError("Conrey index must be a unit mod the modulus")
        exps: Dict[int, Tuple[int, ...]] = {}
        for p, e in factorize(modulus):
            pe = p**e
            exps[p] = _dlog_table(p, e)[index % pe]
        return cls(modulus, exps)

    # -- basic data -----------------------------------------------------------

    @property
    def order(self) -> int:
        if self._order is None:
            r = 1
            for _, _, exps, orders in self._local:
                for k, n in zip(exps, orders):
                    r = math.lcm(r, n // math.gcd(n, k))
            self._order = r
        return self._order

    @property
    def conductor(self) -> int:
        if self._conductor is None:
            f = 1
            for p, _, exps, orders in self._local:
                f *= self._local_conductor(p, exps, orders)
            self._conductor = f
        return self._conductor

    @staticmethod
    def _local_conductor(p: int, exps: Tuple[int, ...], orders: Tuple[int, ...]) -> int:
        if not any(exps):
            return 1
        if p != 2:
            n = orders[0]
            r = n // math.gcd(n, exps[0])
            return p ** (1 + valuation(r, p))
        if len(exps) == 1:  # modulus 4
            return 4 if exps[0] % 2 else 1
        k_minus, k_five = exps
        n_five = orders[1]
        if k_five % n_five:
            t = n_five // math.gcd(n_five, k_five)  # order of value at 5, a power of 2
            return 4 * t
        return 4 if k_minus % 2 else 1

    def is_odd(self) -> bool:
        j, r = self.evaluate(-1)
        return 2 * j == r

    def is_even(self) -> bool:
        return not self.is_odd()

    def is_trivial(self) -> bool:
        return all(not any(exps) for _, _, exps, _ in self._local)

    def is_primitive(self) -> bool:
        return self.conductor == self.modulus

    @property
    def conrey(self) -> int:
        if self.modulus == 1:
            return 1
        residues = []
        moduli = []
        for p, e, exps, _ in self._local:
            pe = p**e
            gens, _ = _local_generators(p, e)
            m = 1
            for g, k in zip(gens, exps):
                m = m * pow(g, k, pe) % pe
            residues.append(m)
            moduli.append(pe)
        x = _crt(residues, moduli)
        return x if x else self.modulus

    # -- evaluation ------------------------------------------------------------

    def evaluate(self, n: int) -> Optional[Tuple[int, int]]:
        """(j, r) with value e^(2*pi*i*j/r), r the character order; None off units."""
        n %= self.modulus
        if self.modulus == 1:
            return (0, 1)
        hit = self._value_cache.get(n, _MISS)
        if hit is not _MISS:
            return hit
        out: Optional[Tuple[int, int]]
        if math.gcd(n, self.modulus) != 1:
            out = None
        else:
            r = self.order
            total = Fraction(0)
            for p, e, exps, orders in self._local:
                if not any(exps):
                    continue
                vec = _dlog_table(p, e)[n % p**e]
                for a, k, m in zip(vec, exps, orders):
                    if k and a:
                        total += Fraction(a * k, m)
            frac = total - math.floor(total)
            j = frac.numerator * (r // frac.denominator) % r
            out = (j, r)
        self._value_cache[n] = out
        return out

    def value_exponent(self, n: int, target_order: int) -> Optional[int]:
        """Exponent of the value as a power of zeta_(target_order)."""
        v = self.evaluate(n)
        if v is None:
            return None
        j, r = v
        if target_order % r:
            raise ValueError("target order not divisible by character order")
        return j * (target_order // r) % target_order

    def re_evaluate(self, n: int) -> CyclotomicInteger:
        """chi(n) + chi(1/n) mod the conductor, or 0 when n is not invertible.

        This is the doubled real part that shows up in trace computations;
        it lives in Z[zeta_r] for r the character order.
        """
        r = self.order
        prim = self.primitive()
        if math.gcd(n, prim.modulus) != 1:
            return CyclotomicInteger.from_int(r, 0)
        j, rp = prim.evaluate(n)
        j = j * (r // rp) % r
        terms = {j: 1}
        terms[-j % r] = terms.get(-j % r, 0) + 1
        return CyclotomicInteger.from_zeta_terms(r, terms)

    # -- algebra -----------------------------------------------------------------

    def _exps_map(self) -> Dict[int, Tuple[int, ...]]:
        return {p: exps for p, _, exps, _ in self._local}

    def __mul__(self, other: "DirichletCharacter") -> "DirichletCharacter":
        if self.modulus != other.modulus:
            m = math.lcm(self.modulus, other.modulus)
            return self.induce(m) * other.induce(m)
        a, b = self._exps_map(), other._exps_map()
        out = {p: tuple(x + y for x, y in zip(a[p], b[p])) for p in a}
        return DirichletCharacter(self.modulus, out)

    def __pow__(self, k: int) -> "DirichletCharacter":
        out = {p: tuple(k * x for x in exps) for p, exps in self._exps_map().items()}
        return DirichletCharacter(self.modulus, out)

    def conjugate(self) -> "DirichletCharacter":
        return self**-1

    def __eq__(self, other) -> bool:
        if not isinstance(other, DirichletCharacter):
            return NotImplemented
        return self.modulus == other.modulus and self._key() == other._key()

    def _key(self):
        return tuple((p, exps) for p, _, exps, _ in self._local)

    def __hash__(self):
        return hash((self.modulus, self._key()))

    def __repr__(self):
        return f"DirichletCharacter({self.modulus}, conrey={self.conrey}, order={self.order})"

    # -- modulus changes -----------------------------------------------------------

    def local_component(self, p: int) -> "DirichletCharacter":
        """The factor of chi supported at p, as a character mod p^v_p(N)."""
        for q, e, exps, _ in self._local:
            if q == p:
                return DirichletCharacter(p**e, {p: exps})
        return DirichletCharacter.trivial(1)

    def primitive(self) -> "DirichletCharacter":
        """The primitive character inducing this one."""
        f = self.conductor
        if f == self.modulus:
            return self
        exps: Dict[int, Tuple[int, ...]] = {}
        for p, e, loc_exps, orders in self._local:
            ef = valuation(f, p) if f % p == 0 else 0
            if ef == 0:
                continue
            new_gens, new_orders = _local_generators(p, ef)
            if p != 2:
                k, n = loc_exps[0], orders[0]
                n2 = new_orders[0]
                exps[p] = (k * n2 // n,)
            else:
                if ef == 2:
                    exps[p] = (loc_exps[0] % 2,)
                else:
                    k5, n5 = loc_exps[1], orders[1]
                    n5new = new_orders[1]
                    exps[p] = (loc_exps[0] % 2, k5 * n5new // n5)
        return DirichletCharacter(f, exps)

    def induce(self, modulus: int) -> "DirichletCharacter":
        """Lift to a character mod a multiple of the current modulus.

        Requires the conductor to divide the target modulus.
        """
        if modulus == self.modulus:
            return self
        prim = self.primitive()
        if modulus % prim.modulus:
            raise ValueError("conductor does not divide the target modulus")
        exps: Dict[int, Tuple[int, ...]] = {}
        for p, ef, loc_exps, orders in prim._local:
            eN = valuation(modulus, p)
            gens, new_orders = _local_generators(p, eN)
            if p != 2:
                n, n2 = orders[0], new_orders[0]
                exps[p] = (loc_exps[0] * n2 // n,)
            else:
                if eN == 2:
                    exps[p] = (loc_exps[0],)
                else:
                    if ef == 2:
                        exps[p] = (loc_exps[0], 0)
                    else:
                        n5, n5new = orders[1], new_orders[1]
                        exps[p] = (loc_exps[0], loc_exps[1] * n5new // n5)
        return DirichletCharacter(modulus, exps)


_MISS = object()


def _crt(residues: Sequence[int], moduli: Sequence[int]) -> int:
    x, m = 0, 1
    for r, n in zip(residues, moduli):
        t = (r - x) * pow(m, -1, n) % n
        x += m * t
        m *= n
    return x % m


# ---------------------------------------------------------------------------
# enumeration and Galois orbits


def all_characters(modulus: int) -> Iterator[DirichletCharacter]:
    """Every character mod N, in Conrey-index order."""
    if modulus == 1:
        yield DirichletCharacter.trivial(1)
        return
    for m in range(1, modulus + 1):
        if math.gcd(m, modulus) == 1:
            yield DirichletCharacter.from_conrey(modulus, m)


class CharacterOrbit:
    """A Galois orbit {chi^a : gcd(a, order) = 1}, labelled by least Conrey index."""

    __slots__ = ("modulus", "order", "conrey_indices")

    def __init__(self, modulus: int, order: int, conrey_indices: Tuple[int, ...]):
        self.modulus = modulus
        self.order = order
        self.conrey_indices = conrey_indices

    @property
    def representative(self) -> DirichletCharacter:
        return DirichletCharacter.from_conrey(self.modulus, self.conrey_indices[0])

    def characters(self) -> List[DirichletCharacter]:
        return [DirichletCharacter.from_conrey(self.modulus, m) for m in self.conrey_indices]

    def __len__(self):
        return len(self.conrey_indices)

    def __eq__(self, other):
        return (isinstance(other, CharacterOrbit)
                and self.modulus == other.modulus
                and self.order == other.order
                and self.conrey_indices == other.conrey_indices)

    def __hash__(self):
        return hash((self.modulus, self.order, self.conrey_indices))

    def __repr__(self):
        return (
            f"CharacterOrbit(modulus={self.modulus}, order={self.order}, "
            f"size={len(self.conrey_indices)}, rep={self.conrey_indices[0]})"
        )


def galois_orbits(modulus: int) -> List[CharacterOrbit]:
    """All characters mod N grouped under chi -> chi^a, sorted by representative."""
    seen = set()
    orbits: List[CharacterOrbit] = []
    for chi in all_characters(modulus):
        m = chi.conrey
        if m in seen:
            continue
        r = chi.order
        members = sorted(
            {pow(m, a, modulus) if modulus > 1 else 1 for a in range(1, r + 1) if math.gcd(a, r) == 1}
        )
        seen.update(members)
        orbits.append(CharacterOrbit(modulus, r, tuple(members)))
    return orbits


# ---------------------------------------------------------------------------
# twist minimality and twist classes


def local_twist_minimal(p: int, e: int, f: int, order: int) -> bool:
    """Minimal-level test for one local component.

    A character of conductor p^f and the given order, attached to the level
    p^e, passes when no twist at p can lower that level.
    """
    if f > e:
        return False
    if f == e:
        return True
    if p > 2:
        return f == 0 or order == 1 << valuation(p - 1, 2)
    if f == 0:
        return e % 2 == 1 or e == 2
    if f == e // 2:
        return True
    return f == 2 and e > 3 and e % 2 == 1


def is_twist_minimal(chi: DirichletCharacter) -> bool:
    """No twist by a Dirichlet character can lower the level of spaces with this nebentypus."""
    f = chi.conductor
    for p, e, _, _ in chi._local:
        fp = valuation(f, p) if f % p == 0 else 0
        loc = chi.local_component(p)
        if not local_twist_minimal(p, e, fp, loc.order):
            return False
    return True


def _local_twist_key(chi: DirichletCharacter, p: int) -> Tuple:
    loc = chi.local_component(p).primitive()
    return (p, loc.modulus, loc._key())


def twist_equivalent(a: DirichletCharacter, b: DirichletCharacter) -> bool:
    """True when a and b agree locally everywhere up to conjugation."""
    primes = {p for p, _ in factorize(a.conductor)} | {p for p, _ in factorize(b.conductor)}
    for p in primes:
        ka = _local_twist_key(a, p)
        kb = _local_twist_key(b, p)
        kbc = _local_twist_key(b.conjugate(), p)
        if ka != kb and ka != kbc:
            return False
    return True


def twist_class_key(chi: DirichletCharacter) -> Tuple:
    """Canonical key identifying chi up to local conjugation at each prime."""
    conj = chi.conjugate()
    keys = []
    for p, _ in factorize(chi.conductor):
        keys.append(min(_local_twist_key(chi, p), _local_twist_key(conj, p)))
    return tuple(sorted(keys))
