"""Tests for the low-degree machinery.

Expected values for the coordinate expansion and for interpolated curves are
produced by independent oracles (linear solves against the monomial basis,
direct Lagrange sums) rather than by the code under test.
"""

import itertools
import random

import numpy as np
import pytest
from scipy.stats import chi2

from eprlab.errors import (
    DimensionMismatch,
    InvalidOperand,
    TooManyPoints,
    ZeroPolynomial,
)
from eprlab.gf import field, mat_solve
from eprlab.rmpoly import (
    AffineSubspace,
    CoordInjection,
    Curve,
    MultiPoly,
    count_zeros,
    curve_through,
    enumerate_planes,
    enumerate_points,
    num_affine_planes,
    point_subspace,
    restrict_to_curve,
    restrict_to_subspace,
    sample_plane_point,
    subst_map,
    subst_rewrite,
    subst_width,
)

F2 = field(2, 1)
F4 = field(2, 2)
F8 = field(2, 3)
F16 = field(2, 4)
W = F4.el(2)


def all_points(spec, m):
    return [tuple(map(spec.el, t)) for t in itertools.product(range(spec.q), repeat=m)]


# -- oracles --


def oracle_expansion(inj, x):
    """Solve for the unique vector e with f(x) = sum_i e_i f(pi(i)) for every
    f of per-variable degree < h.  Uses only field linear algebra."""
    spec = inj.spec
    monomials = list(itertools.product(range(inj.h), repeat=inj.m))
    assert len(monomials) >= inj.n

    def mono_eval(exps, pt):
        acc = spec.one
        for e, v in zip(exps, pt):
            acc = acc * v**e
        return acc

    # one equation per monomial, one unknown per position
    rows = [
        [mono_eval(mono, inj.pi_point(i)) for i in range(1, inj.n + 1)]
        for mono in monomials
    ]
    rhs = [mono_eval(mono, x) for mono in monomials]
    sol = mat_solve(rows, rhs)
    assert sol is not None, "expansion system must be solvable when h^m == n"
    return sol


def oracle_curve_value(points, t):
    """Direct Lagrange sum through (code(i), points[i]), no polynomial objects."""
    spec = points[0][0].spec
    ts = [spec.el(i) for i in range(len(points))]
    m = len(points[0])
    out = []
    for j in range(m):
        acc = spec.zero
        for i, ti in enumerate(ts):
            num, den = spec.one, spec.one
            for k, tk in enumerate(ts):
                if k != i:
                    num = num * (t - tk)
                    den = den * (ti - tk)
            acc = acc + points[i][j] * num / den
        out.append(acc)
    return tuple(out)


def random_poly(rng, spec, m, max_terms=6, max_exp=3):
    coeffs = {}
    for _ in range(rng.randrange(1, max_terms + 1)):
        exps = tuple(rng.randrange(max_exp + 1) for _ in range(m))
        coeffs[exps] = spec.el(rng.randrange(spec.q))
    return MultiPoly(spec, m, coeffs)


# -- coordinate injection and expansion --


def test_pi_digits_lsd_first():
    inj = CoordInjection(F4, n=4, h=2, m=2)
    assert [inj.pi(i) for i in range(1, 5)] == [(0, 0), (1, 0), (0, 1), (1, 1)]


def test_pi_rejects_undersized_grid():
    with pytest.raises(InvalidOperand):
        CoordInjection(F2, n=9, h=2, m=3)
    with pytest.raises(InvalidOperand):
        CoordInjection(F2, n=2, h=3, m=1)


def test_expansion_is_grid_indicator():
    for spec, h, m in [(F4, 2, 2), (F2, 2, 3), (F8, 3, 2)]:
        n = h**m
        inj = CoordInjection(spec, n=n, h=h, m=m)
        for i in range(1, n + 1):
            ex = inj.coord_expand(inj.pi_point(i))
            assert [e.code for e in ex] == [int(j == i - 1) for j in range(n)]


def test_expansion_matches_linear_solve_oracle():
    inj = CoordInjection(F4, n=4, h=2, m=2)
    x = (W, W)
    expected = oracle_expansion(inj, x)
    # frozen from the oracle: (w, 1, 1, w^2)
    assert [e.code for e in expected] == [2, 1, 1, 3]
    assert inj.coord_expand(x) == tuple(expected)


def test_expansion_matches_oracle_everywhere():
    inj = CoordInjection(F4, n=4, h=2, m=2)
    for x in all_points(F4, 2):
        assert inj.coord_expand(x) == tuple(oracle_expansion(inj, x))


def test_encode_hits_assignment_and_respects_degrees():
    rng = random.Random(11)
    for spec, h, m, n in [(F4, 2, 2, 4), (F2, 2, 3, 7), (F8, 3, 2, 9)]:
        inj = CoordInjection(spec, n=n, h=h, m=m)
        a = tuple(spec.el(rng.randrange(spec.q)) for _ in range(n))
        g = inj.encode(a)
        for i in range(1, n + 1):
            assert g.eval(inj.pi_point(i)) == a[i - 1]
        for j in range(m):
            assert g.var_degree(j) <= h - 1


def test_encode_zero_and_unit_vectors():
    inj = CoordInjection(F4, n=4, h=2, m=2)
    zero = inj.encode((F4.zero,) * 4)
    assert zero.is_zero()
    for i in range(1, 5):
        a = tuple(F4.one if j == i - 1 else F4.zero for j in range(4))
        assert inj.encode(a) == inj.lagrange_basis_poly(i)


def test_interpolation_identity_exhaustive():
    # g(x) = sum_i expand(x)_i g(pi(i)) for every point of the domain
    for spec, h, m, n in [(F4, 2, 2, 4), (F2, 2, 3, 8), (F8, 3, 2, 9)]:
        inj = CoordInjection(spec, n=n, h=h, m=m)
        rng = random.Random(n)
        a = tuple(spec.el(rng.randrange(spec.q)) for _ in range(n))
        g = inj.encode(a)
        vals = [g.eval(inj.pi_point(i)) for i in range(1, n + 1)]
        for x in all_points(spec, m):
            ex = inj.coord_expand(x)
            acc = spec.zero
            for e, v in zip(ex, vals):
                acc = acc + e * v
            assert acc == g.eval(x)


# -- polynomial arithmetic --


def test_eval_example_and_arity_check():
    f = MultiPoly(F4, 1, {(2,): F4.one, (1,): F4.one})
    assert f.eval((W,)) == F4.one
    with pytest.raises(DimensionMismatch):
        f.eval((W, W))


def test_poly_ring_laws_random():
    rng = random.Random(3)
    for _ in range(50):
        a = random_poly(rng, F4, 2)
        b = random_poly(rng, F4, 2)
        c = random_poly(rng, F4, 2)
        assert (a + b) * c == a * c + b * c
        assert a * b == b * a
        for x in [(F4.el(1), W), (W, W)]:
            assert (a * b).eval(x) == a.eval(x) * b.eval(x)
            assert (a + b).eval(x) == a.eval(x) + b.eval(x)


def test_declared_bounds_enforced():
    with pytest.raises(InvalidOperand):
        MultiPoly(F4, 2, {(2, 0): F4.one}, per_var_bound=1)
    with pytest.raises(InvalidOperand):
        MultiPoly(F4, 2, {(1, 1): F4.one}, total_bound=1)
    p = MultiPoly(F4, 2, {(1, 1): F4.one}, per_var_bound=1, total_bound=2)
    assert p.total_degree() == 2


def test_zero_coefficients_are_dropped():
    p = MultiPoly(F4, 1, {(3,): F4.zero, (1,): F4.one})
    assert (1,) in p.coeffs and (3,) not in p.coeffs
    assert (p - p).is_zero()


def test_serialization_roundtrip():
    rng = random.Random(5)
    p = random_poly(rng, F8, 3)
    assert MultiPoly.from_json(F8, 3, p.to_json()) == p


# -- affine subspaces --


def test_subspace_canonical_form_is_representation_independent():
    base = (W, F4.one, F4.zero)
    d1 = (F4.one, W, F4.zero)
    d2 = (F4.zero, F4.one, F4.one)
    s = AffineSubspace.make(base, [d1, d2])
    # same plane through a different point with a mangled basis
    other_base = tuple(b + x + y for b, x, y in zip(base, d1, d2))
    mix1 = tuple(x + y for x, y in zip(d1, d2))
    mix2 = tuple(W * x for x in d2)
    s2 = AffineSubspace.make(other_base, [mix1, mix2])
    assert s == s2
    assert set(map(tuple, s.points())) == set(map(tuple, s2.points()))


def test_subspace_membership_and_parametrization():
    s = AffineSubspace.make((W, F4.one), [(F4.one, W)])
    pts = list(s.points())
    assert len(pts) == 4
    for p in pts:
        assert p in s
        t = s.locate(p)
        assert s.parametrize(t) == p
    outside = [p for p in all_points(F4, 2) if p not in s]
    assert len(outside) == 12


def test_point_subspace_dim_zero():
    s = point_subspace((W, W))
    assert s.dim == 0
    assert list(s.points()) == [(W, W)]
    assert (W, W) in s and (W, F4.one) not in s


def test_dependent_directions_rejected():
    with pytest.raises(InvalidOperand):
        AffineSubspace.make((F4.zero, F4.zero), [(F4.one, W), (W, W * W)])


def test_subspace_serialization_roundtrip():
    s = AffineSubspace.make((W, F4.one, F4.zero), [(F4.one, W, F4.zero), (F4.zero, F4.one, F4.one)])
    assert AffineSubspace.from_json(F4, s.to_json()) == s


def test_restrict_to_subspace_agrees_with_eval():
    rng = random.Random(17)
    for dim in (0, 1, 2):
        for _ in range(20):
            g = random_poly(rng, F4, 3)
            base = tuple(F4.el(rng.randrange(4)) for _ in range(3))
            dirs = []
            while len(dirs) < dim:
                cand = tuple(F4.el(rng.randrange(4)) for _ in range(3))
                try:
                    AffineSubspace.make((F4.zero,) * 3, dirs + [cand])
                except InvalidOperand:
                    continue
                dirs.append(cand)
            s = AffineSubspace.make(base, dirs)
            r = restrict_to_subspace(g, s)
            assert r.num_vars == s.dim
            for _ in range(8):
                params = tuple(F4.el(rng.randrange(4)) for _ in range(s.dim))
                assert r.eval(params) == g.eval(s.parametrize(params))


def test_restriction_degree_bounds():
    inj = CoordInjection(F4, n=4, h=2, m=2)
    g = inj.encode((F4.one, W, W * W, F4.one))
    s = AffineSubspace.make((F4.zero, F4.zero), [(F4.one, F4.zero), (F4.zero, F4.one)])
    r = restrict_to_subspace(g, s)
    assert r.total_degree() <= g.total_degree()
    c = curve_through([(F4.zero, F4.one), (W, W), (F4.el(3), F4.zero)])
    rc = restrict_to_curve(g, c)
    assert rc.total_degree() <= g.total_degree() * c.degree


# -- curves --


def test_curve_through_matches_lagrange_oracle():
    pts = [(F4.zero, F4.one), (W, W), (F4.el(3), F4.zero)]
    c = curve_through(pts)
    assert c.degree == 2
    for i, p in enumerate(pts):
        assert c.at(F4.el(i)) == p
    for t in (F4.el(k) for k in range(4)):
        assert c.at(t) == oracle_curve_value(pts, t)


def test_curve_degenerate_sizes():
    c1 = curve_through([(W, F4.one)])
    assert c1.degree == 0
    for t in (F4.el(k) for k in range(4)):
        assert c1.at(t) == (W, F4.one)
    c2 = curve_through([(F4.zero, F4.zero), (F4.one, W)])
    assert c2.degree == 1
    assert c2.at(F4.zero) == (F4.zero, F4.zero)
    assert c2.at(F4.one) == (F4.one, W)


def test_curve_too_many_points():
    pts = [(F4.el(k), F4.zero) for k in range(4)]
    curve_through(pts)  # exactly q points is fine
    with pytest.raises(TooManyPoints):
        curve_through(pts + [(F4.zero, F4.one)])


def test_curve_declared_degree_validated():
    comp = MultiPoly(F4, 1, {(2,): F4.one})
    with pytest.raises(InvalidOperand):
        Curve((comp,), 1)
    Curve((comp,), 3)  # slack above actual degree is allowed


def test_curve_serialization_roundtrip():
    pts = [(F4.zero, F4.one), (W, W), (F4.el(3), F4.zero)]
    c = curve_through(pts)
    c2 = Curve.from_json(F4, c.to_json())
    assert c2.degree == c.degree and c2.components == c.components


def test_restrict_to_curve_agrees_with_eval():
    rng = random.Random(23)
    for _ in range(20):
        g = random_poly(rng, F8, 2)
        pts = [tuple(F8.el(rng.randrange(8)) for _ in range(2)) for _ in range(3)]
        c = curve_through(pts)
        r = restrict_to_curve(g, c)
        for tc in range(8):
            t = F8.el(tc)
            assert r.eval((t,)) == g.eval(c.at(t))


# -- variable substitution --


def test_subst_width_and_map():
    assert subst_width(1) == 1
    assert subst_width(2) == 2
    assert subst_width(4) == 3
    x = W
    assert subst_map(x, 1) == (x,)
    assert subst_map(x, 4) == (x, x**2, x**4)


def test_subst_rewrite_cube_is_multilinear_product():
    f = MultiPoly(F4, 1, {(3,): F4.one})
    rw = subst_rewrite(f, 4)
    assert set(rw.coeffs) == {(1, 1, 0)}


def test_subst_rewrite_agrees_at_random_points():
    rng = random.Random(31)
    for _ in range(100):
        d = rng.randrange(1, 8)
        coeffs = {(k,): F16.el(rng.randrange(16)) for k in range(d + 1)}
        f = MultiPoly(F16, 1, coeffs)
        rw = subst_rewrite(f, d)
        for e in rw.coeffs:
            assert all(b <= 1 for b in e)
        x = F16.el(rng.randrange(16))
        assert rw.eval(subst_map(x, d)) == f.eval((x,))


def test_subst_rewrite_rejects_overdegree():
    f = MultiPoly(F4, 1, {(5,): F4.one})
    with pytest.raises(InvalidOperand):
        subst_rewrite(f, 4)


# -- question sampling --


def enumerate_affine_planes(spec, m):
    linear = set()
    nonzero = [p for p in all_points(spec, m) if any(p)]
    for d1 in nonzero:
        for d2 in nonzero:
            try:
                s = AffineSubspace.make((spec.zero,) * m, [d1, d2])
            except InvalidOperand:
                continue
            linear.add(s.directions)
    planes = set()
    for dirs in linear:
        for base in all_points(spec, m):
            planes.add(AffineSubspace.make(base, list(dirs)))
    return planes


def test_enumerators_match_oracle():
    assert enumerate_points(F4, 2) == all_points(F4, 2)
    for spec, m in [(F2, 2), (F2, 3), (F4, 3)]:
        planes = enumerate_planes(spec, m)
        assert set(planes) == enumerate_affine_planes(spec, m)
        assert len(planes) == num_affine_planes(spec, m)
    listed = enumerate_planes(F2, 3)
    assert listed == sorted(listed, key=lambda s: str(s.to_json()))
    assert num_affine_planes(F2, 4) == 140


def test_plane_sampler_m2_gives_full_plane():
    rng = np.random.default_rng(1)
    s, w = sample_plane_point(rng, F4, 2)
    assert s.dim == 2 and s.base == (F4.zero, F4.zero)
    assert s.directions == ((F4.one, F4.zero), (F4.zero, F4.one))
    assert w in s


def test_plane_sampler_uniform_chi2():
    spec = F4
    planes = sorted(enumerate_affine_planes(spec, 3), key=lambda s: str(s.to_json()))
    assert len(planes) == 84
    index = {s: i for i, s in enumerate(planes)}
    rng = np.random.default_rng(2024)
    draws = 100_000
    plane_counts = np.zeros(len(planes))
    point_counts = np.zeros(spec.q**3)
    for _ in range(draws):
        s, w = sample_plane_point(rng, spec, 3)
        plane_counts[index[s]] += 1
        assert w in s
        code = 0
        for e in reversed(w):
            code = code * spec.q + e.code
        point_counts[code] += 1
    for counts in (plane_counts, point_counts):
        expected = draws / len(counts)
        stat = float(((counts - expected) ** 2 / expected).sum())
        assert stat < chi2.ppf(0.999, len(counts) - 1)


def test_plane_sampler_needs_two_dims():
    with pytest.raises(InvalidOperand):
        sample_plane_point(np.random.default_rng(0), F4, 1)


# -- zero counting and Schwartz-Zippel --


def test_count_zeros_linear_and_constant():
    lin = MultiPoly(F4, 2, {(1, 0): F4.one, (0, 1): W})
    assert count_zeros(lin) == 4
    const = MultiPoly(F4, 2, {(0, 0): W})
    assert count_zeros(const) == 0
    with pytest.raises(ZeroPolynomial):
        count_zeros(MultiPoly.zero(F4, 2))


def test_count_zeros_tight_product_of_linear_forms():
    # (x1)(x1+1)(x1+w) has exactly d*q^(m-1) roots
    p = MultiPoly.constant(F4, 2, F4.one)
    for c in range(3):
        p = p * MultiPoly(F4, 2, {(1, 0): F4.one, (0, 0): F4.el(c)})
    assert count_zeros(p) == 3 * 4 ** (2 - 1)


def test_schwartz_zippel_pairwise():
    rng = random.Random(41)
    inj = CoordInjection(F4, n=4, h=2, m=2)
    polys = []
    seen = set()
    while len(polys) < 8:
        a = tuple(F4.el(rng.randrange(4)) for _ in range(4))
        if a in seen:
            continue
        seen.add(a)
        polys.append(inj.encode(a))
    d = 2  # per-variable degree 1 in two variables
    for f, g in itertools.combinations(polys, 2):
        diff = f - g
        assert not diff.is_zero()
        agreements = count_zeros(diff)
        assert agreements <= d * 4 ** (2 - 1)
