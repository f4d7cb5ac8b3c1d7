"""Weight-1 Eisenstein series attached to ordered character pairs.

A pair (chi1, chi2) of primitive characters is admissible at level N for
a character chi when chi2 is even, the conductors multiply into N, the
product chi1 * conj(chi2) is chi, and one divisibility constraint ties
the conductor of chi1 to the conductor of chi.  The positive-index
Fourier coefficients are divisor sums of character values, so they live
in Z[zeta]; the constant term is rational over the same field with
denominator dividing 2 f(chi), and is nonzero only when chi2 is trivial.

The series with a nonzero constant term are the useful divisors for the
quotient step downstream, so `eis_basis_set` lists those first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Tuple

from .arithmetic import divisors
from .characters import DirichletCharacter
from .cyclotomic import CyclotomicInteger, ModularProjection, reduce_zeta_fractions

__all__ = [
    "EisensteinSeries",
    "EisExpansion",
    "eis_basis_set",
    "eis_coeffs",
]


@dataclass(frozen=True)
class EisensteinSeries:
    """One admissible pair with its ambient level."""

    chi1: DirichletCharacter
    chi2: DirichletCharacter
    level: int

    def __post_init__(self):
        c1, c2 = self.chi1, self.chi2
        if c1.modulus != c1.conductor or c2.modulus != c2.conductor:
            raise ValueError("pair characters must be primitive")
        if not c2.is_even():
            raise ValueError("second character must be even")
        if self.level % (c1.conductor * c2.conductor):
            raise ValueError("conductor product must divide the level")
        f_chi = self.character.conductor
        if (self.level // f_chi) % math.gcd(c1.conductor, self.level // c1.conductor):
            raise ValueError("conductor of the first character sits badly in the level")

    @property
    def character(self) -> DirichletCharacter:
        """The primitive character the series transforms under."""
        return (self.chi1 * self.chi2.conjugate()).primitive()

    @property
    def order(self) -> int:
        r1, r2 = self.chi1.order, self.chi2.order
        return r1 * r2 // math.gcd(r1, r2)

    def has_constant_term(self) -> bool:
        return self.chi2.is_trivial()


def eis_basis_set(N: int, chi: DirichletCharacter) -> List[EisensteinSeries]:
    """Admissible pairs at level N for chi, constant-term series first.

    Only the b = 1 representatives are returned; rescalings by divisors of
    N over the conductor product add nothing to the quotient step.  The
    enumeration runs over conductors of the first character, so the result
    order is deterministic.
    """
    target = chi.primitive()
    if N % target.conductor:
        raise ValueError("character conductor must divide the level")
    found: List[EisensteinSeries] = []
    for f1 in divisors(N):
        for chi1 in _primitive_characters(f1):
            chi2 = (chi1 * target.conjugate()).primitive()
            if not chi2.is_even():
                continue
            if N % (f1 * chi2.conductor):
                continue
            if (N // target.conductor) % math.gcd(f1, N // f1):
                continue
            found.append(EisensteinSeries(chi1, chi2, N))
    found.sort(key=lambda E: (not E.has_constant_term(),
                              E.chi1.conductor, E.chi1.conrey))
    return found


def _primitive_characters(modulus: int) -> Tuple[DirichletCharacter, ...]:
    from .traceform import _primitive_characters as prim

    return prim(modulus)


@dataclass(frozen=True)
class EisExpansion:
    """Fourier data a_0 .. a_m of one series.

    `constant` holds a_0 as exact rationals on the power basis of the
    order-`order` cyclotomic field; `tail` holds a_1 .. a_m as cyclotomic
    integers.  `scale` is 2 f(chi): multiplying through by it clears the
    constant denominator, and `scaled_projection` does exactly that before
    reducing into a residue field.
    """

    order: int
    constant: Tuple[Fraction, ...]
    tail: Tuple[CyclotomicInteger, ...]
    scale: int

    @property
    def precision(self) -> int:
        return len(self.tail)

    def scaled_constant(self) -> CyclotomicInteger:
        coeffs = [c * self.scale for c in self.constant]
        if any(c.denominator != 1 for c in coeffs):
            raise ArithmeticError("constant denominator exceeds the advertised scale")
        return CyclotomicInteger(self.order, [int(c) for c in coeffs])

    def scaled_projection(self, proj: ModularProjection) -> List[int]:
        """[2f*a_0, 2f*a_1, ..., 2f*a_m] in the residue field."""
        q = proj.q
        if self.scale % q == 0:
            raise ArithmeticError("residue characteristic divides the clearing scale")
        head = proj.project(self.scaled_constant())
        return [head] + [proj.project(c) * self.scale % q for c in self.tail]


def eis_coeffs(E: EisensteinSeries, m: int) -> EisExpansion:
    """Expansion of E to index m: divisor sums over the two characters."""
    if m < 1:
        raise ValueError("precision must be at least 1")
    R = E.order
    c1, c2 = E.chi1, E.chi2
    tail: List[CyclotomicInteger] = []
    for n in range(1, m + 1):
        terms: Dict[int, int] = {}
        for d in divisors(n):
            j1 = c1.value_exponent(d, R)
            if j1 is None:
                continue
            j2 = c2.value_exponent(n // d, R)
            if j2 is None:
                continue
            e = (j1 + j2) % R
            terms[e] = terms.get(e, 0) + 1
        tail.append(CyclotomicInteger.from_zeta_terms(R, terms))
    chi = E.character
    f = chi.conductor
    const: Dict[int, Fraction] = {}
    if E.has_constant_term():
        for r in range(1, f):
            j = chi.value_exponent(r, R)
            if j is None:
                continue
            const[j] = const.get(j, Fraction(0)) + Fraction(-r, 2 * f)
    constant = tuple(reduce_zeta_fractions(const, R))
    return EisExpansion(order=R, constant=constant, tail=tuple(tail), scale=2 * f)
