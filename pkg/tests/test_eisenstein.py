import math
from fractions import Fraction

import pytest

from wt1.arithmetic import class_data
from wt1.characters import DirichletCharacter, all_characters
from wt1.cyclotomic import ModularProjection
from wt1.eisenstein import EisensteinSeries, eis_basis_set, eis_coeffs

from oracles import dirichlet_class_number


def odd_quadratic(modulus):
    (chi,) = [c for c in all_characters(modulus)
              if c.order == 2 and c.is_odd() and c.is_primitive()]
    return chi


def test_basis_set_level_3():
    chi = odd_quadratic(3)
    series = eis_basis_set(3, chi)
    assert len(series) == 1
    (E,) = series
    assert E.chi1 == chi and E.chi2.is_trivial()


def test_basis_set_level_23():
    chi = odd_quadratic(23)
    series = eis_basis_set(23, chi)
    assert len(series) == 1
    assert series[0].chi1 == chi and series[0].chi2.is_trivial()


def test_basis_set_level_4():
    chi = odd_quadratic(4)
    series = eis_basis_set(4, chi)
    assert len(series) == 1
    assert series[0].chi1 == chi and series[0].chi2.is_trivial()


def test_basis_set_level_124_conjugate_has_two_elements():
    chi = DirichletCharacter.from_conrey(124, 67)
    series = eis_basis_set(124, chi.conjugate())
    assert len(series) == 2
    assert series[0].has_constant_term()
    assert not series[1].has_constant_term()


def test_basis_set_rejects_foreign_conductor():
    chi = odd_quadratic(23)
    with pytest.raises(ValueError):
        eis_basis_set(46, odd_quadratic(4))
    assert eis_basis_set(46, chi)  # conductor divides, fine


def test_level_3_expansion():
    chi = odd_quadratic(3)
    (E,) = eis_basis_set(3, chi)
    ex = eis_coeffs(E, 4)
    assert ex.constant == (Fraction(1, 6),)
    assert [c.coeffs[0] for c in ex.tail] == [1, 0, 1, 1]
    assert ex.scale == 6


def test_level_23_expansion():
    chi = odd_quadratic(23)
    (E,) = eis_basis_set(23, chi)
    ex = eis_coeffs(E, 2)
    assert ex.constant == (Fraction(3, 2),)
    assert ex.tail[0].coeffs[0] == 1
    assert ex.tail[1].coeffs[0] == 2


def test_constant_term_is_class_number_ratio():
    # h(d)/w(d) for the odd quadratic character of discriminant d
    for m in (3, 4, 7, 8, 11, 15, 19, 20, 23, 24, 31, 39, 40, 43, 47,
              51, 52, 55, 59, 67, 68, 71, 79, 83, 84, 87, 88, 91, 95,
              103, 104, 107, 111, 115, 116, 119, 120, 123, 127, 131,
              132, 136, 139, 143, 148, 151, 152, 155, 159, 163, 164,
              167, 168, 179, 183, 184, 187, 191, 195, 199):
        chi = odd_quadratic(m)
        (E,) = [e for e in eis_basis_set(m, chi) if e.has_constant_term()]
        ex = eis_coeffs(E, 1)
        d = -m
        h, w = class_data(d)
        assert ex.constant == (Fraction(dirichlet_class_number(d), w),), d
        assert ex.constant == (Fraction(h, w),), d


def test_first_coefficient_is_one():
    for N, conrey in ((7, 3), (9, 2), (11, 7), (124, 67)):
        chi = DirichletCharacter.from_conrey(N, conrey)
        for E in eis_basis_set(N, chi if chi.is_odd() else chi.conjugate()):
            ex = eis_coeffs(E, 1)
            one = ex.tail[0]
            assert one.coeffs[0] == 1 and not any(one.coeffs[1:])


def test_coefficients_are_multiplicative():
    chi = DirichletCharacter.from_conrey(124, 67)
    for E in eis_basis_set(124, chi.conjugate()):
        ex = eis_coeffs(E, 50)
        a = {n: ex.tail[n - 1] for n in range(1, 51)}
        for m in range(2, 51):
            for n in range(2, 51):
                if m * n <= 50 and math.gcd(m, n) == 1:
                    assert a[m] * a[n] == a[m * n], (m, n)


def test_nontrivial_second_character_kills_constant_term():
    chi = DirichletCharacter.from_conrey(124, 67)
    E = eis_basis_set(124, chi.conjugate())[1]
    ex = eis_coeffs(E, 3)
    assert all(c == 0 for c in ex.constant)
    assert ex.scaled_constant().is_zero()


def test_scaled_projection_clears_denominator():
    chi = odd_quadratic(23)
    (E,) = eis_basis_set(23, chi)
    ex = eis_coeffs(E, 6)
    proj = ModularProjection(2, level=23, q=4001)
    vec = ex.scaled_projection(proj)
    assert vec[0] == 69  # a0 * 2f = 3/2 * 46
    assert len(vec) == 7


def test_scaled_projection_rejects_bad_characteristic():
    chi = odd_quadratic(3)
    (E,) = eis_basis_set(3, chi)
    ex = eis_coeffs(E, 2)
    with pytest.raises(ArithmeticError):
        ex.scaled_projection(ModularProjection(2, level=1, q=3))


def test_series_validation():
    chi4 = odd_quadratic(4)
    triv = DirichletCharacter.trivial(1)
    with pytest.raises(ValueError, match="primitive"):
        EisensteinSeries(chi4.induce(8), triv, 8)
    with pytest.raises(ValueError, match="even"):
        EisensteinSeries(triv, chi4, 4)
    even5 = DirichletCharacter.from_conrey(5, 4)
    assert even5.is_even() and even5.is_primitive()
    with pytest.raises(ValueError, match="divide"):
        EisensteinSeries(chi4, even5, 2)


def test_precision_must_be_positive():
    chi = odd_quadratic(3)
    (E,) = eis_basis_set(3, chi)
    with pytest.raises(ValueError):
        eis_coeffs(E, 0)
