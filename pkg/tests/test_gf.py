"""Field-layer tests: arithmetic against a naive polynomial oracle, traces,
self-dual bases, coordinates, and the small linear-algebra helpers."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprlab.errors import (
    InvalidOperand,
    LengthMismatch,
    NoSelfDualBasis,
    SearchExhausted,
    SpecMismatch,
)
from eprlab.gf import (
    FieldSpec,
    field,
    mat_nullspace,
    mat_rank,
    mat_rref,
    mat_solve,
    self_dual_basis,
    span_iter,
    tr_dot,
    vec_dot,
)

# ---------------------------------------------------------------------------
# reference oracle: naive schoolbook multiply-and-reduce, independent of the
# exp/log tables the library actually uses
# ---------------------------------------------------------------------------


def oracle_mul(spec, a_code, b_code):
    p, t = spec.p, spec.t
    da = [(a_code // p**i) % p for i in range(t)]
    db = [(b_code // p**i) % p for i in range(t)]
    prod = [0] * (2 * t - 1)
    for i in range(t):
        for j in range(t):
            prod[i + j] += da[i] * db[j]
    prod = [c % p for c in prod]
    for k in range(len(prod) - 1, t - 1, -1):
        c = prod[k]
        if c:
            prod[k] = 0
            for j in range(t + 1):
                if k - t + j < len(prod):
                    prod[k - t + j] = (prod[k - t + j] - c * spec.modulus[j]) % p
    return sum(prod[i] * p**i for i in range(t))


@pytest.mark.parametrize("p,t", [(2, 2), (2, 3), (2, 4), (3, 1), (3, 2), (3, 3)])
def test_mul_matches_oracle_exhaustively(p, t):
    spec = field(p, t)
    for a in range(spec.q):
        for b in range(spec.q):
            assert spec.mul_code(a, b) == oracle_mul(spec, a, b)


def test_gf4_omega_times_omega_squared_is_one():
    f4 = field(2, 2)
    w = f4.el(2)
    w2 = w * w
    assert w2.code == 3  # w^2 = w + 1 under x^2 + x + 1
    assert (w * w2).code == 1
    assert oracle_mul(f4, 2, 3) == 1


def test_char2_self_cancellation():
    f8 = field(2, 3)
    for a in f8.elements():
        assert (a + a).code == 0


def test_inverse_of_one():
    for spec in (field(2, 1), field(3, 2)):
        assert spec.one.inverse() == spec.one


def test_division_by_zero_rejected():
    f4 = field(2, 2)
    with pytest.raises(InvalidOperand):
        f4.zero.inverse()
    with pytest.raises(InvalidOperand):
        f4.el(3) / f4.zero


def test_mixed_spec_rejected():
    with pytest.raises(SpecMismatch):
        field(2, 2).el(1) + field(2, 3).el(1)


# ---------------------------------------------------------------------------
# trace
# ---------------------------------------------------------------------------


def test_trace_frozen_values():
    f4 = field(2, 2)
    assert f4.zero.trace() == 0
    assert f4.el(2).trace() == 1  # w + w^2 = 1
    assert f4.one.trace() == 0  # 1 + 1 = 0 in characteristic 2


def test_trace_linear_and_frobenius_invariant():
    rng = random.Random(0)
    for spec in (field(2, 4), field(3, 3)):
        for _ in range(1000):
            a = spec.el(rng.randrange(spec.q))
            b = spec.el(rng.randrange(spec.q))
            assert (a + b).trace() == (a.trace() + b.trace()) % spec.p
            assert (a**spec.p).trace() == a.trace()


def test_trace_lands_in_prime_subfield():
    for spec in (field(2, 5), field(3, 3)):
        for a in spec.elements():
            assert 0 <= a.trace() < spec.p


# ---------------------------------------------------------------------------
# multiplicative structure
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("p,t", [(2, 1), (2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (3, 1), (3, 2), (3, 3)])
def test_multiplicative_group_order(p, t):
    spec = field(p, t)
    for code in range(1, spec.q):
        assert spec.pow_code(code, spec.q - 1) == 1


@settings(max_examples=200)
@given(st.integers(0, 26), st.integers(0, 26), st.integers(0, 26))
def test_gf27_ring_laws(a, b, c):
    f = field(3, 3)
    x, y, z = f.el(a), f.el(b), f.el(c)
    assert x * (y + z) == x * y + x * z
    assert (x * y) * z == x * (y * z)
    assert x + (y + z) == (x + y) + z


def test_bad_modulus_rejected():
    # x^2 + 1 = (x + 1)^2 over GF(2)
    with pytest.raises(InvalidOperand):
        FieldSpec(2, 2, (1, 0, 1))


# ---------------------------------------------------------------------------
# self-dual bases and coordinates
# ---------------------------------------------------------------------------


def test_self_dual_t1_is_unit():
    b = self_dual_basis(field(2, 1))
    assert [e.code for e in b.basis] == [1]
    b3 = self_dual_basis(field(3, 1))
    assert [e.code for e in b3.basis] == [1]


def test_self_dual_gf4_is_omega_pair():
    b = self_dual_basis(field(2, 2))
    assert [e.code for e in b.basis] == [2, 3]


def test_no_self_dual_basis_for_gf9():
    with pytest.raises(NoSelfDualBasis):
        self_dual_basis(field(3, 2))


def test_self_dual_search_cap():
    with pytest.raises(SearchExhausted):
        self_dual_basis(FieldSpec(2, 7, (1, 1, 0, 0, 0, 0, 0, 1)))


@pytest.mark.parametrize("p,t", [(2, 1), (2, 2), (2, 3), (2, 4), (2, 5), (2, 6), (3, 1), (3, 3), (3, 5)])
def test_self_dual_gram_identity(p, t):
    spec = field(p, t)
    basis = self_dual_basis(spec).basis
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            assert (bi * bj).trace() == (1 if i == j else 0)


def test_coords_roundtrip_gf4_exhaustive():
    spec = field(2, 2)
    sdb = self_dual_basis(spec)
    for a in spec.elements():
        assert sdb.uncoords(sdb.coords(a)) == a


@pytest.mark.parametrize("p,t", [(2, 3), (2, 6), (3, 3)])
def test_coords_bijective_and_trace_pairing(p, t):
    spec = field(p, t)
    sdb = self_dual_basis(spec)
    seen = set()
    for a in spec.elements():
        cs = sdb.coords(a)
        seen.add(cs)
        assert sdb.uncoords(cs) == a
    assert len(seen) == spec.q
    rng = random.Random(7)
    for _ in range(200):
        a = spec.el(rng.randrange(spec.q))
        b = spec.el(rng.randrange(spec.q))
        dot = sum(x * y for x, y in zip(sdb.coords(a), sdb.coords(b))) % spec.p
        assert dot == (a * b).trace()


def test_coords_of_basis_elements_are_unit_vectors():
    sdb = self_dual_basis(field(2, 3))
    for i, b in enumerate(sdb.basis):
        expected = tuple(1 if j == i else 0 for j in range(3))
        assert sdb.coords(b) == expected
    assert sdb.coords(field(2, 3).zero) == (0, 0, 0)


# ---------------------------------------------------------------------------
# vectors and matrices
# ---------------------------------------------------------------------------


def test_vec_dot_cases():
    f4 = field(2, 2)
    w = f4.el(2)
    assert vec_dot((w, f4.one), (f4.one, w)) == f4.zero  # w + w = 0
    assert vec_dot((f4.zero, f4.zero), (w, w)) == f4.zero
    assert tr_dot((w,), (f4.one,)) == 1
    with pytest.raises(LengthMismatch):
        vec_dot((w,), (w, w))


def test_rref_rank_nullspace_solve():
    f2 = field(2, 1)
    one, zero = f2.one, f2.zero
    rows = [(one, one, zero), (zero, one, one), (one, zero, one)]
    assert mat_rank(rows) == 2
    ns = mat_nullspace(rows)
    assert len(ns) == 1
    v = ns[0]
    for r in rows:
        assert vec_dot(r, v) == zero
    sol = mat_solve([(one, one, zero), (zero, one, one)], (one, one))
    assert sol is not None
    assert vec_dot((one, one, zero), sol) == one
    assert vec_dot((zero, one, one), sol) == one
    assert mat_solve([(one, one), (one, one)], (zero, one)) is None


def test_span_iter_counts():
    f3 = field(3, 1)
    one, zero = f3.one, f3.zero
    vs = list(span_iter([(one, zero), (zero, one)]))
    assert len(vs) == 9
    assert len(set(vs)) == 9
    vs1 = list(span_iter([(one, one), (f3.el(2), f3.el(2))]))
    assert len(set(vs1)) == 3  # dependent rows collapse to a line


def test_serialization_roundtrip():
    spec = field(3, 3)
    again = FieldSpec.from_json(spec.to_json())
    assert again == spec
    a = spec.el(17)
    assert spec.from_digits(a.digits) == a
