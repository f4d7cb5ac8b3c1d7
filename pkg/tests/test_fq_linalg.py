"""Residue-field linear algebra and q-expansion operations.

Synthetic eigen-series built from the multiplicative recursion
a_{p^k} = a_p a_{p^{k-1}} - s_p a_{p^{k-2}} provide an independent model
of the Hecke action: any such series satisfies (T_p f) = a_p f exactly,
so the stabilisation and diagonalisation routines can be checked against
spaces with a known eigenstructure.
"""

from __future__ import annotations

import random
from typing import Dict, List

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import eta_product
from wt1.arithmetic import factorize
from wt1.characters import DirichletCharacter
from wt1.cyclotomic import CyclotomicInteger, ModularProjection
from wt1.fq_linalg import (
    Eigenvector,
    FqMatrix,
    QExpansion,
    charpoly_mod,
    column_space_basis,
    column_space_intersection,
    diagonalise_new,
    divide_series,
    hecke_apply,
    in_column_space,
    kernel,
    matmul,
    poly_gcd,
    poly_is_squarefree,
    poly_mul,
    poly_roots,
    project_expansion,
    rank,
    rref,
    solve_matrix,
    stable_subspace,
)
from wt1.kernels import numba_impl, numpy_impl

Q = 101


def mult_series(q: int, a_p: Dict[int, int], m: int, s_p: Dict[int, int] | None = None) -> List[int]:
    """a_1..a_m of the multiplicative series with prescribed prime data."""
    s_p = s_p or {}
    a = [0] * (m + 1)
    a[1] = 1
    for n in range(2, m + 1):
        p, e = factorize(n)[0]
        pe = p ** e
        if pe < n:
            a[n] = a[pe] * a[n // pe] % q
        elif e == 1:
            a[n] = a_p.get(p, 1) % q
        else:
            prev2 = a[p ** (e - 2)] if e >= 2 else 0
            a[n] = (a_p.get(p, 1) * a[p ** (e - 1)] - s_p.get(p, 1) * prev2) % q
    return a[1:]


def det_mod(a: np.ndarray, q: int) -> int:
    """Determinant by plain Gaussian elimination, for charpoly checks."""
    m = [[int(v) % q for v in row] for row in a.tolist()]
    n = len(m)
    det = 1
    for c in range(n):
        piv = next((i for i in range(c, n) if m[i][c]), None)
        if piv is None:
            return 0
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det % q
        det = det * m[c][c] % q
        inv = pow(m[c][c], q - 2, q)
        for i in range(c + 1, n):
            f = m[i][c] * inv % q
            if f:
                for j in range(c, n):
                    m[i][j] = (m[i][j] - f * m[c][j]) % q
    return det % q


# -- kernel backends ---------------------------------------------------------


BACKENDS = [numpy_impl, numba_impl]


@pytest.mark.parametrize("impl", BACKENDS, ids=["numpy", "numba"])
def test_backend_rref_contract(impl):
    a = np.array([[2, 4, 6], [1, 2, 3], [0, 5, 5]], dtype=np.int64)
    r, pivots, rk = impl.rref_mod(a, Q)
    assert rk == 2 and list(pivots) == [0, 1]
    assert r[0, 0] == 1 and r[1, 1] == 1
    # row 2 of the input is a combination of the others
    assert not r[2, :].any()


def test_backends_agree_on_random_inputs():
    rng = np.random.default_rng(7)
    for _ in range(12):
        a = rng.integers(0, Q, size=(rng.integers(1, 7), rng.integers(1, 7)), dtype=np.int64)
        rn, pn, kn = numpy_impl.rref_mod(a, Q)
        rb, pb, kb = numba_impl.rref_mod(a, Q)
        assert kn == kb and (rn == rb).all() and (pn == pb).all()
        assert (numpy_impl.nullspace_mod(a, Q) == numba_impl.nullspace_mod(a, Q)).all()
        b = rng.integers(0, Q, size=(a.shape[1], 3), dtype=np.int64)
        assert (numpy_impl.matmul_mod(a, b, Q) == numba_impl.matmul_mod(a, b, Q)).all()
    f = rng.integers(0, Q, size=20, dtype=np.int64)
    e = rng.integers(0, Q, size=20, dtype=np.int64)
    e[0] = 3
    assert (numpy_impl.divide_series_mod(f, e, Q, 20)
            == numba_impl.divide_series_mod(f, e, Q, 20)).all()
    cols = rng.integers(0, Q, size=(24, 3), dtype=np.int64)
    for fi in (0, 1):
        assert (numpy_impl.hecke_series_mod(cols, 3, 17, Q, first_index=fi)
                == numba_impl.hecke_series_mod(cols, 3, 17, Q, first_index=fi)).all()


# -- matrices ----------------------------------------------------------------


def test_identity_and_zero_matrices():
    eye = FqMatrix.identity(Q, 3)
    assert rank(eye) == 3
    assert kernel(eye).ncols == 0
    r, piv = rref(eye)
    assert r == eye and piv == (0, 1, 2)
    zero = FqMatrix.zeros(Q, 4, 2)
    assert rank(zero) == 0
    assert kernel(zero).ncols == 2


def test_rank_two_kernel():
    # 5 x 3, third column = first + second
    cols = [[1, 0, 2, 0, 1], [0, 1, 3, 0, 1], [1, 1, 5, 0, 2]]
    m = FqMatrix.from_columns(Q, cols)
    assert m.nrows == 5 and m.ncols == 3
    assert rank(m) == 2
    k = kernel(m)
    assert k.ncols == 1
    assert not matmul(m, k).entries.any()


@given(st.integers(2, 5), st.integers(2, 5), st.data())
@settings(max_examples=40, deadline=None)
def test_rank_nullity_property(nr, nc, data):
    entries = data.draw(st.lists(
        st.lists(st.integers(0, Q - 1), min_size=nc, max_size=nc),
        min_size=nr, max_size=nr))
    m = FqMatrix(Q, np.array(entries, dtype=np.int64))
    assert rank(m) + kernel(m).ncols == nc
    assert not matmul(m, kernel(m)).entries.any() if kernel(m).ncols else True
    r, piv = rref(m)
    assert rref(r)[0] == r  # reduction is idempotent


def test_solve_matrix():
    a = FqMatrix.from_columns(Q, [[1, 0, 1], [2, 1, 0]])
    rhs = FqMatrix.from_columns(Q, [[5, 2, 1]])
    x = solve_matrix(a, rhs)
    assert x is not None
    assert matmul(a, x) == rhs
    bad = FqMatrix.from_columns(Q, [[0, 0, 1]])
    assert solve_matrix(FqMatrix.from_columns(Q, [[1, 0, 0], [0, 1, 0]]), bad) is None


def test_column_space_helpers():
    v1 = FqMatrix.from_columns(Q, [[1, 0, 0], [0, 1, 0]])
    v2 = FqMatrix.from_columns(Q, [[0, 1, 0], [0, 0, 1]])
    both = column_space_intersection(v1, v2)
    assert both.ncols == 1
    assert list(both.entries[:, 0]) == [0, 1, 0]
    # canonical basis ignores the presentation of the span
    scrambled = FqMatrix.from_columns(Q, [[3, 5, 0], [1, 99, 0]])
    assert column_space_basis(scrambled) == column_space_basis(v1)
    assert in_column_space(v1, np.array([4, 7, 0]))
    assert not in_column_space(v1, np.array([0, 0, 1]))


def test_intersection_of_three_spaces():
    e = np.eye(4, dtype=np.int64)
    span = lambda *js: FqMatrix(Q, e[:, list(js)])
    meet = column_space_intersection(span(0, 1, 2), span(1, 2, 3), span(0, 2, 1))
    expect = column_space_basis(span(1, 2))
    assert meet == expect
    nothing = column_space_intersection(span(0), span(1))
    assert nothing.ncols == 0


# -- polynomials -------------------------------------------------------------


def test_charpoly_companion_and_blocks():
    # companion matrix of x^3 + 2x + 5
    c = np.array([[0, 0, -5], [1, 0, -2], [0, 1, 0]], dtype=np.int64) % Q
    assert charpoly_mod(c, Q) == [5, 2, 0, 1]
    upper = np.array([[3, 9], [0, 4]], dtype=np.int64)
    assert charpoly_mod(upper, Q) == poly_mul([-3 % Q, 1], [-4 % Q, 1], Q)


@given(st.integers(1, 5), st.data())
@settings(max_examples=30, deadline=None)
def test_charpoly_matches_determinant_evaluation(n, data):
    entries = data.draw(st.lists(
        st.lists(st.integers(0, Q - 1), min_size=n, max_size=n),
        min_size=n, max_size=n))
    a = np.array(entries, dtype=np.int64)
    cp = charpoly_mod(a, Q)
    assert len(cp) == n + 1 and cp[-1] == 1
    for x0 in (0, 1, 17, 64):
        direct = det_mod((x0 * np.eye(n, dtype=np.int64) - a) % Q, Q)
        via_poly = sum(c * pow(x0, i, Q) for i, c in enumerate(cp)) % Q
        assert direct == via_poly


def test_poly_roots_and_squarefree():
    f = poly_mul(poly_mul([-2 % Q, 1], [-5 % Q, 1], Q), [-7 % Q, 1], Q)
    # attach an irreducible quadratic: 101 = 2 mod 3 so x^2 + x + 1 has no roots
    g = poly_mul(f, [1, 1, 1], Q)
    rng = random.Random(0)
    assert poly_roots(g, Q, rng) == [2, 5, 7]
    assert poly_is_squarefree(g, Q)
    doubled = poly_mul(g, [-5 % Q, 1], Q)
    assert not poly_is_squarefree(doubled, Q)
    assert poly_roots(doubled, Q, rng) == [2, 5, 7]
    assert poly_gcd(f, [1, 1, 1], Q) == [1]
    assert poly_roots([0, 1], Q, rng) == [0]


# -- q-expansions ------------------------------------------------------------


def eta11(prec: int) -> QExpansion:
    coeffs = [0] + eta_product({1: 2, 11: 2}, prec)
    chi = DirichletCharacter.trivial(11)
    return QExpansion(2, 11, chi, "cyclotomic", coeffs, prec)


def test_qexpansion_guards():
    with pytest.raises(ValueError):
        QExpansion(1, 4, None, "adelic", [0, 1], 1)
    with pytest.raises(ValueError):
        QExpansion(1, 4, None, "residue", [0, 1], 3, modulus=Q)
    with pytest.raises(ValueError):
        QExpansion(1, 4, None, "residue", [0, 0.5], 1, modulus=Q)
    f = QExpansion(1, 4, None, "residue", [0, 1, 5], 2, modulus=Q)
    assert f.coeff(2) == 5
    with pytest.raises(IndexError):
        f.coeff(3)


def test_divide_series_geometric():
    ones = QExpansion(0, 1, None, "residue", [1] * 13, 12, modulus=Q)
    one = QExpansion(0, 1, None, "residue", [1] + [0] * 12, 12, modulus=Q)
    g = divide_series(one, ones)
    assert g.precision == 12
    assert g.coeffs == [1, Q - 1] + [0] * 11  # 1/(1+x+x^2+...) = 1 - x


def test_divide_series_valuation_one():
    # x / (x + x^2) = 1 - x + x^2 - ...
    f = QExpansion(1, 1, None, "residue", [0, 1] + [0] * 8, 9, modulus=Q)
    e = QExpansion(1, 1, None, "residue", [0, 1, 1] + [0] * 7, 9, modulus=Q)
    g = divide_series(f, e)
    assert g.precision == 8
    assert g.coeffs == [pow(-1, n, Q) for n in range(9)]
    bare = QExpansion(1, 1, None, "residue", [1] + [0] * 9, 9, modulus=Q)
    with pytest.raises(ValueError):
        divide_series(bare, e)  # dividend valuation 0 < divisor valuation 1
    zero = QExpansion(1, 1, None, "residue", [0, 0, 1] + [0] * 7, 9, modulus=Q)
    with pytest.raises(ZeroDivisionError):
        divide_series(f, zero)


@given(st.data())
@settings(max_examples=25, deadline=None)
def test_divide_series_multiply_round_trip(data):
    m = data.draw(st.integers(4, 14))
    v = data.draw(st.integers(0, 1))
    f_tail = data.draw(st.lists(st.integers(0, Q - 1), min_size=m + 1 - v, max_size=m + 1 - v))
    e_tail = data.draw(st.lists(st.integers(0, Q - 1), min_size=m - v, max_size=m - v))
    lead = data.draw(st.integers(1, Q - 1))
    f = QExpansion(1, 1, None, "residue", [0] * v + f_tail, m, modulus=Q)
    e = QExpansion(1, 1, None, "residue", [0] * v + [lead] + e_tail, m, modulus=Q)
    g = divide_series(f, e)
    assert g.precision == m - v
    # convolution of the quotient with the divisor reproduces the dividend
    for n in range(m + 1):
        acc = sum(g.coeffs[k] * e.coeffs[n - k] for k in range(min(n, m - v) + 1)) % Q
        assert acc == f.coeffs[n]


def test_hecke_on_level_11_eigenform():
    prec = 60
    f = project_expansion(eta11(prec), ModularProjection(2, level=11, q=Q))
    t3 = hecke_apply(f, 3, ModularProjection(2, level=11, q=Q))
    assert t3.precision == prec // 3
    assert t3.coeff(1) == (-1) % Q
    a3 = f.coeff(3)
    for n in range(t3.precision + 1):
        assert t3.coeff(n) == a3 * f.coeff(n) % Q
    # chi(11) = 0 kills the second term entirely
    t11 = hecke_apply(f, 11, ModularProjection(2, level=11, q=Q))
    assert t11.precision == prec // 11
    for n in range(t11.precision + 1):
        assert t11.coeff(n) == f.coeff(11 * n)


def test_hecke_exact_domain_with_character():
    chi = DirichletCharacter.from_conrey(4, 3)
    f = QExpansion(1, 4, chi, "cyclotomic", list(range(9)), 8)
    t2 = hecke_apply(f, 2)
    assert t2.precision == 4
    assert [c for c in t2.coeffs] == [CyclotomicInteger.from_int(1, v) for v in (0, 2, 4, 6, 8)]
    t3 = hecke_apply(f, 3)  # chi(3) = -1 at weight 1
    assert t3.precision == 2
    assert t3.coeff(0) == CyclotomicInteger.from_int(1, 0)
    assert t3.coeff(1) == CyclotomicInteger.from_int(1, 3)
    assert t3.coeff(2) == CyclotomicInteger.from_int(1, 6)
    exact = eta11(30)
    t3e = hecke_apply(exact, 3)
    proj = ModularProjection(2, level=11, q=Q)
    assert project_expansion(t3e, proj).coeffs == hecke_apply(
        project_expansion(exact, proj), 3, proj).coeffs


# -- stabilisation -----------------------------------------------------------


def series_matrix(cols: List[List[int]], pad_constant: bool = False) -> FqMatrix:
    if pad_constant:
        cols = [[0] + c for c in cols]
    return FqMatrix.from_columns(Q, cols)


def test_stable_subspace_fixpoint():
    m = 24
    f = mult_series(Q, {2: 3, 3: 1}, m)
    g = mult_series(Q, {2: 5, 3: 2}, m)
    e3 = [0] * m
    e3[2] = 1
    noisy = series_matrix([f, [(x + y) % Q for x, y in zip(g, e3)], e3])
    out = stable_subspace(noisy, 2, 1, rank_prefix=6, first_index=1)
    assert out.ncols == 2
    want = column_space_basis(series_matrix([f, g]))
    assert column_space_basis(out) == want
    again = stable_subspace(out, 2, 1, rank_prefix=6, first_index=1)
    assert again == out  # idempotent on an already-stable space
    # same data with an explicit a_0 row and zero-based indexing
    noisy0 = series_matrix([f, g, e3], pad_constant=True)
    out0 = stable_subspace(noisy0, 2, 1, rank_prefix=7, first_index=0)
    assert column_space_basis(out0) == column_space_basis(series_matrix([f, g], pad_constant=True))


def test_stable_subspace_degenerate_cases():
    empty = stable_subspace(FqMatrix.zeros(Q, 12, 0), 2, 1, rank_prefix=3)
    assert empty.ncols == 0
    lone = series_matrix([mult_series(Q, {2: 9}, 20)])
    assert stable_subspace(lone, 2, 1, rank_prefix=5, first_index=1) == lone
    with pytest.raises(ValueError):
        stable_subspace(lone, 2, 1, rank_prefix=11, first_index=1)


def test_diagonalise_recovers_synthetic_eigenforms():
    m = 32
    f = mult_series(Q, {2: 3, 3: 1}, m)
    g = mult_series(Q, {2: 5, 3: 2}, m)
    mixed = series_matrix([[(x + y) % Q for x, y in zip(f, g)],
                           [(x - y) % Q for x, y in zip(f, g)]])
    eigs = diagonalise_new(mixed, FqMatrix.zeros(Q, m, 0), 77, 1,
                           hecke_ops=[(2, 1)], rank_prefix=8, first_index=1)
    assert len(eigs) == 2
    recovered = sorted(tuple(e.series) for e in eigs)
    assert recovered == sorted([tuple(f), tuple(g)])
    twice = diagonalise_new(mixed, FqMatrix.zeros(Q, m, 0), 77, 1,
                            hecke_ops=[(2, 1)], rank_prefix=8, first_index=1)
    assert [tuple(e.series) for e in twice] == [tuple(e.series) for e in eigs]
    assert [e.combo for e in twice] == [e.combo for e in eigs]
    # same space with an a_0 row and zero-based rows
    padded = series_matrix([[(x + y) % Q for x, y in zip(f, g)],
                            [(x - y) % Q for x, y in zip(f, g)]], pad_constant=True)
    eigs0 = diagonalise_new(padded, FqMatrix.zeros(Q, m + 1, 0), 77, 1,
                            hecke_ops=[(2, 1)], rank_prefix=8, first_index=0)
    assert sorted(tuple(e.series) for e in eigs0) == sorted(
        [tuple([0] + f), tuple([0] + g)])


def test_diagonalise_quotients_out_old_space():
    m = 32
    f = mult_series(Q, {2: 3, 3: 1}, m)
    g = mult_series(Q, {2: 5, 3: 2}, m)
    space = series_matrix([[(x + 2 * y) % Q for x, y in zip(f, g)], f])
    old = series_matrix([f])
    eigs = diagonalise_new(space, old, 77, 1, hecke_ops=[(2, 1)],
                           rank_prefix=8, first_index=1)
    assert len(eigs) == 1
    assert tuple(eigs[0].series) == tuple(g)


def test_diagonalise_skips_residually_quadratic_pairs():
    # q = 3 mod 4: the Gaussian-integer eigen-series splits into two real
    # series on which T_2 acts by [[0, -1], [1, 0]], irreducible over F_q
    q = 103
    m = 24
    re = [0] * (m + 1)
    im = [0] * (m + 1)
    re[1] = 1
    for n in range(2, m + 1):
        p, e = factorize(n)[0]
        pe = p ** e
        if pe < n:
            a, b = re[pe], im[pe]
            c, d = re[n // pe], im[n // pe]
            re[n], im[n] = (a * c - b * d) % q, (a * d + b * c) % q
        elif p == 2:
            if e == 1:
                re[n], im[n] = 0, 1
            else:
                re[n] = (-im[2 ** (e - 1)] - re[2 ** (e - 2)]) % q
                im[n] = (re[2 ** (e - 1)] - im[2 ** (e - 2)]) % q
        else:
            re[n], im[n] = (2 * re[n // p] - (re[n // p ** 2] if e > 1 else 0)) % q, \
                           (2 * im[n // p] - (im[n // p ** 2] if e > 1 else 0)) % q
    space = FqMatrix.from_columns(q, [re[1:], im[1:]])
    assert stable_subspace(space, 2, 1, rank_prefix=6, first_index=1) == space
    eigs = diagonalise_new(space, FqMatrix.zeros(q, m, 0), 5, 1,
                           hecke_ops=[(2, 1)], rank_prefix=6, first_index=1)
    assert eigs == []


def test_diagonalise_retry_budget_exhausts_on_scalar_action():
    m = 24
    f = mult_series(Q, {2: 3, 3: 1}, m)
    g = mult_series(Q, {2: 3, 3: 2}, m)  # same T_2 eigenvalue, different series
    space = series_matrix([f, g])
    with pytest.raises(ArithmeticError):
        diagonalise_new(space, FqMatrix.zeros(Q, m, 0), 5, 1,
                        hecke_ops=[(2, 1)], rank_prefix=6, first_index=1)
    # a second operator separates what T_2 alone cannot
    eigs = diagonalise_new(space, FqMatrix.zeros(Q, m, 0), 5, 1,
                           hecke_ops=[(2, 1), (3, 1)], rank_prefix=6, first_index=1)
    assert sorted(tuple(e.series) for e in eigs) == sorted([tuple(f), tuple(g)])


def test_eigenvector_eigenvalue_reporting():
    m = 28
    f = mult_series(Q, {2: 7}, m)
    space = series_matrix([f])
    eigs = diagonalise_new(space, FqMatrix.zeros(Q, m, 0), 9, 1,
                           hecke_ops=[(2, 1)], rank_prefix=6, first_index=1)
    assert len(eigs) == 1
    ev = eigs[0]
    assert isinstance(ev, Eigenvector)
    ((p, c),) = ev.combo
    assert p == 2 and ev.eigenvalue == c * 7 % Q
