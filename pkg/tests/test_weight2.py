import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wt1.arithmetic import divisors, num_divisors, sturm_bound, valuation
from wt1.cyclotomic import CyclotomicInteger
from wt1.fq_linalg import FqMatrix, rank
from wt1.traceform import (
    coefficient_computations,
    hecke_on_traceform,
    reset_coefficient_computations,
)
from wt1.weight2 import (
    Weight2Basis,
    _rank_projection,
    _state,
    basis_set_B,
    clear_cache,
    dim_s2_full_trace,
    dim_s2_new_oracle,
    dim_s2_new_trace,
    dim_s2_oracle,
    embedding_set_A,
    full_basis,
    load_basis,
    newform_basis,
    save_basis,
    trace_index_high_water,
)

from oracles import eta_product


def as_int(c: CyclotomicInteger) -> int:
    assert not any(c.coeffs[1:])
    return c.coeffs[0]


# ---------------------------------------------------------------------------
# dimension formulas


def test_genus_oracle_small_values():
    assert dim_s2_oracle(1) == 0
    assert dim_s2_oracle(11) == 1
    assert dim_s2_oracle(23) == 2
    assert dim_s2_oracle(22) == 2
    assert dim_s2_oracle(37) == 2
    assert dim_s2_oracle(100) == 7


def test_genus_oracle_rejects_nonpositive_level():
    with pytest.raises(ValueError):
        dim_s2_oracle(0)


def test_new_dimensions_match_genus_peel():
    for N in range(1, 200):
        assert dim_s2_new_trace(N) == dim_s2_new_oracle(N), N


def test_full_dimension_is_divisor_sum_of_new():
    for N in (48, 90, 121, 144, 175, 256):
        total = sum(num_divisors(N // M) * dim_s2_new_oracle(M) for M in divisors(N))
        assert dim_s2_full_trace(N) == total == dim_s2_oracle(N)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=1, max_value=420))
def test_trace_dimension_equals_genus(N):
    assert dim_s2_full_trace(N) == dim_s2_oracle(N)


# ---------------------------------------------------------------------------
# embedding exponents and Hecke index sets


def test_embedding_exponents_low_order_orbits():
    A = _state(11).A
    (orbit,) = list(A)
    assert A[orbit] == [1]


def test_embedding_exponents_order_five_orbit():
    from wt1.traceform import twist_pair_orbits

    orbits = twist_pair_orbits(121)
    A = embedding_set_A(orbits)
    fives = [o for o in orbits if o.order == 5]
    assert fives, "level 121 should carry an order-5 twist orbit"
    for o in fives:
        assert A[o] == [1, 2]


def test_embedding_dedup_disabled_keeps_all_candidates():
    st_ = _state(121)
    loose = embedding_set_A(st_.orbits, dedup=False)
    for o in st_.orbits:
        r = o.order
        want = [a for a in range(1, r // 2 + 1) if math.gcd(a, r) == 1] or [1]
        assert loose[o] == want


def test_basis_set_B_level_11():
    st_ = _state(11)
    (orbit,) = st_.orbits
    assert basis_set_B(orbit) == [1]


def test_basis_set_B_rejects_wrong_dimension():
    st_ = _state(11)
    (orbit,) = st_.orbits
    with pytest.raises(ValueError):
        basis_set_B(orbit, d=5)


def test_basis_set_B_rejects_foreign_orbit():
    (o11,) = _state(11).orbits
    _state(23)
    with pytest.raises(ValueError):
        basis_set_B(type(o11)(23, 11, o11.orbit))


def test_hecke_index_sets_are_within_sturm_bound():
    for N in (11, 37, 91, 175):
        st_ = _state(N)
        for o in st_.orbits:
            B = basis_set_B(o)
            d = st_.forms[o].dimension
            assert len(B) == d
            assert all(1 <= b <= sturm_bound(o.inner_level, 2) for b in B)
            assert B == sorted(B)


# ---------------------------------------------------------------------------
# newform bases


def test_level_11_matches_eta_product():
    basis = newform_basis(11, 4, 1)
    assert basis.dim == 1
    got = [as_int(c) for c in basis.columns[0]]
    assert got == eta_product({1: 2, 11: 2}, 4)


def test_level_1_is_empty():
    basis = newform_basis(1, 10, 1)
    assert basis.dim == 0
    assert len(basis.matrix) == 10 and all(row == [] for row in basis.matrix)


def test_level_22_has_no_newforms():
    assert newform_basis(22, 8, 1).dim == 0


def test_level_175_newform_basis_and_trace_budget():
    clear_cache()
    basis = newform_basis(175, 30, 12)
    assert basis.dim == dim_s2_new_oracle(175) == 9
    assert trace_index_high_water() <= 120


def test_columns_vanish_at_square_part_of_level():
    for N in (9, 27, 98, 175):
        basis = newform_basis(N, 24, 12)
        square_primes = [p for p in (2, 3, 5, 7) if valuation(N, p) >= 2 and N % p == 0]
        assert square_primes
        for col in basis.columns:
            for n in range(1, basis.precision + 1):
                if any(n % p == 0 for p in square_primes):
                    assert not any(col[n - 1].coeffs), (N, n)


def test_assembled_matrix_has_full_rank_at_sturm_precision():
    for N in (11, 37, 63, 175):
        beta = sturm_bound(N, 2)
        basis = newform_basis(N, beta, 12)
        shared = 1
        for col in basis.columns:
            shared = shared * col[0].order // math.gcd(shared, col[0].order)
        proj = _rank_projection(shared, N)
        assert rank(FqMatrix(proj.q, basis.project(proj))) == basis.dim


def test_rejects_H_not_divisible_by_orbit_order():
    clear_cache()
    with pytest.raises(ValueError, match="does not divide"):
        newform_basis(256, 10, 2)


def test_precision_must_be_positive():
    with pytest.raises(ValueError):
        newform_basis(11, 0, 1)


# ---------------------------------------------------------------------------
# full bases


def test_full_basis_small_levels():
    assert full_basis(11, 10, 1).dim == 1
    assert full_basis(22, 10, 1).dim == 2
    assert full_basis(124, 12, 12).dim == 14
    assert full_basis(175, 30, 12).dim == 15


def test_full_basis_lift_rescales_indices():
    basis = full_basis(22, 12, 1)
    by_lift = {p.lift: col for col, p in zip(basis.columns, basis.provenance)}
    src = by_lift[1]
    lifted = by_lift[2]
    for n in range(1, 13):
        if n % 2 == 0:
            assert lifted[n - 1] == src[n // 2 - 1]
        else:
            assert not any(lifted[n - 1].coeffs)


def test_full_basis_column_counts_match_genus():
    for N in (36, 49, 64, 75, 96, 120, 180, 256):
        assert full_basis(N, 12, 24).dim == dim_s2_oracle(N), N


# ---------------------------------------------------------------------------
# deduplication does not change the span


def test_dedup_disabled_adds_no_new_directions():
    for N in (121, 133, 256):
        st_ = _state(N)
        m = sturm_bound(N, 2)
        base = newform_basis(N, m, 60)
        proj = _rank_projection(60, N)
        stack = base.project(proj)
        base_rank = rank(FqMatrix(proj.q, stack))
        assert base_rank == base.dim
        loose = embedding_set_A(st_.orbits, dedup=False)
        extras = []
        for o in st_.orbits:
            form = st_.forms[o]
            if form.dimension == 0:
                continue
            B = basis_set_B(o)
            for a in loose[o]:
                for b in B:
                    vec = hecke_on_traceform(form, b, m)
                    col = vec if a == 1 else [c.galois_map(a) for c in vec]
                    extras.append([proj.project(c) for c in col])
        widened = np.hstack([stack, np.array(extras, dtype=np.int64).T])
        assert rank(FqMatrix(proj.q, widened)) == base_rank, N


# ---------------------------------------------------------------------------
# caching behavior


def test_repeat_build_recomputes_no_trace_coefficients():
    clear_cache()
    newform_basis(37, 12, 1)
    reset_coefficient_computations()
    newform_basis(37, 12, 1)
    assert coefficient_computations() == 0


def test_precision_extension_reuses_prefix():
    clear_cache()
    newform_basis(37, 8, 1)
    before = coefficient_computations()
    newform_basis(37, 16, 1)
    newform_basis(37, 16, 1)
    after = coefficient_computations()
    assert after > before  # genuinely extended
    reset_coefficient_computations()
    newform_basis(37, 16, 1)
    assert coefficient_computations() == 0


# ---------------------------------------------------------------------------
# basis object and cache files


def test_weight2_basis_validation():
    col = [CyclotomicInteger.from_int(1, 1)]
    with pytest.raises(ValueError, match="provenance"):
        Weight2Basis(11, 1, 1, [col], [])
    basis = newform_basis(11, 6, 1)
    with pytest.raises(ValueError, match="truncate"):
        basis.truncated(7)
    assert basis.truncated(6) == basis
    short = basis.truncated(3)
    assert short.precision == 3 and short.dim == basis.dim


def test_entry_order_must_divide_shared_order():
    basis = newform_basis(121, 6, 10)
    with pytest.raises(ValueError, match="order"):
        Weight2Basis(121, 6, 3, basis.columns, basis.provenance)


def test_cache_file_round_trip(tmp_path):
    basis = full_basis(175, 20, 12)
    path = str(tmp_path / "wt2.json")
    save_basis(basis, path)
    loaded = load_basis(path)
    assert loaded == basis
    assert [p for p in loaded.provenance] == [p for p in basis.provenance]


def test_cache_file_rejects_corrupt_dimension(tmp_path):
    import json

    basis = newform_basis(11, 4, 1)
    path = str(tmp_path / "wt2.json")
    save_basis(basis, path)
    doc = json.load(open(path))
    doc["dim"] = 5
    json.dump(doc, open(path, "w"))
    with pytest.raises(ValueError, match="dimension"):
        load_basis(path)
