"""Low-degree machinery over GF(q)^m: the coordinate-expansion map, sparse
multivariate polynomials, affine subspace and curve questions, and the
variable-substitution trick that keeps curve answers short.

Grid conventions: the integer grid {0..h-1} embeds into GF(q) by element code
(code k is the k-th element in the power-basis enumeration), which keeps grid
points distinct even when h exceeds the characteristic.  The injection pi maps
position i to the base-h digits of i-1, least significant digit first.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Iterator, Sequence, Union

from .errors import (
    DimensionCap,
    DimensionMismatch,
    InvalidOperand,
    LengthMismatch,
    TooManyPoints,
    ZeroPolynomial,
)
from .gf import FieldElement, FieldSpec, mat_rref, mat_solve, vec_dot

Point = tuple[FieldElement, ...]

MAX_ENUM = 1 << 20


def point_codes(x: Sequence[FieldElement]) -> tuple[int, ...]:
    return tuple(e.code for e in x)


def codes_point(spec: FieldSpec, codes: Sequence[int]) -> Point:
    return tuple(spec.el(c) for c in codes)


class MultiPoly:
    """Sparse multivariate polynomial over GF(q).

    coeffs maps exponent tuples to nonzero FieldElements.  Optional declared
    bounds (per-variable / total degree) are validated at construction; all
    arithmetic drops them, since results of general operations carry no
    promise.
    """

    __slots__ = ("spec", "num_vars", "coeffs", "per_var_bound", "total_bound")

    def __init__(
        self,
        spec: FieldSpec,
        num_vars: int,
        coeffs: dict[tuple[int, ...], FieldElement],
        per_var_bound: int | None = None,
        total_bound: int | None = None,
    ):
        clean = {}
        for exps, c in coeffs.items():
            if len(exps) != num_vars:
                raise DimensionMismatch(
                    f"exponent tuple {exps} has arity {len(exps)}, expected {num_vars}"
                )
            if c.code != 0:
                clean[tuple(int(e) for e in exps)] = c
        if per_var_bound is not None:
            for exps in clean:
                if any(e > per_var_bound for e in exps):
                    raise InvalidOperand(
                        f"exponents {exps} break per-variable bound {per_var_bound}"
                    )
        if total_bound is not None:
            for exps in clean:
                if sum(exps) > total_bound:
                    raise InvalidOperand(
                        f"exponents {exps} break total-degree bound {total_bound}"
                    )
        self.spec = spec
        self.num_vars = num_vars
        self.coeffs = clean
        self.per_var_bound = per_var_bound
        self.total_bound = total_bound

    # -- constructors --

    @staticmethod
    def zero(spec: FieldSpec, num_vars: int) -> MultiPoly:
        return MultiPoly(spec, num_vars, {})

    @staticmethod
    def constant(spec: FieldSpec, num_vars: int, c: FieldElement) -> MultiPoly:
        return MultiPoly(spec, num_vars, {(0,) * num_vars: c})

    @staticmethod
    def variable(spec: FieldSpec, num_vars: int, j: int) -> MultiPoly:
        exps = tuple(1 if i == j else 0 for i in range(num_vars))
        return MultiPoly(spec, num_vars, {exps: spec.one})

    # -- structure --

    def is_zero(self) -> bool:
        return not self.coeffs

    def total_degree(self) -> int:
        """Total degree; the zero polynomial reports 0."""
        return max((sum(e) for e in self.coeffs), default=0)

    def var_degree(self, j: int) -> int:
        return max((e[j] for e in self.coeffs), default=0)

    def canonical(self) -> tuple[tuple[tuple[int, ...], int], ...]:
        """Hashable canonical form: sorted (exponents, coefficient code) pairs."""
        return tuple(sorted((e, c.code) for e, c in self.coeffs.items()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, MultiPoly):
            return NotImplemented
        return (
            self.spec == other.spec
            and self.num_vars == other.num_vars
            and self.canonical() == other.canonical()
        )

    def __hash__(self) -> int:
        return hash((self.spec, self.num_vars, self.canonical()))

    def __repr__(self) -> str:
        terms = ", ".join(f"{e}:{c.code}" for e, c in sorted(self.coeffs.items()))
        return f"MultiPoly({self.num_vars} vars; {terms or '0'})"

    # -- arithmetic --

    def _like(self, coeffs: dict) -> MultiPoly:
        return MultiPoly(self.spec, self.num_vars, coeffs)

    def __add__(self, other: MultiPoly) -> MultiPoly:
        if self.num_vars != other.num_vars:
            raise DimensionMismatch("arity mismatch in polynomial addition")
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            acc = out.get(e)
            out[e] = c if acc is None else acc + c
        return self._like(out)

    def __neg__(self) -> MultiPoly:
        return self._like({e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other: MultiPoly) -> MultiPoly:
        return self + (-other)

    def scale(self, c: FieldElement) -> MultiPoly:
        return self._like({e: c * v for e, v in self.coeffs.items()})

    def __mul__(self, other: MultiPoly) -> MultiPoly:
        if self.num_vars != other.num_vars:
            raise DimensionMismatch("arity mismatch in polynomial product")
        out: dict[tuple[int, ...], FieldElement] = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                acc = out.get(e)
                out[e] = c if acc is None else acc + c
        return self._like(out)

    def pow(self, n: int) -> MultiPoly:
        acc = MultiPoly.constant(self.spec, self.num_vars, self.spec.one)
        for _ in range(n):
            acc = acc * self
        return acc

    def eval(self, x: Sequence[FieldElement]) -> FieldElement:
        if len(x) != self.num_vars:
            raise DimensionMismatch(f"point arity {len(x)}, expected {self.num_vars}")
        spec = self.spec
        acc = 0
        # power cache per variable keeps exhaustive sweeps affordable
        pows: list[dict[int, int]] = [{0: 1} for _ in range(self.num_vars)]
        for e, c in self.coeffs.items():
            term = c.code
            for j, ej in enumerate(e):
                if ej:
                    cache = pows[j]
                    v = cache.get(ej)
                    if v is None:
                        v = spec.pow_code(x[j].code, ej)
                        cache[ej] = v
                    term = spec.mul_code(term, v)
            acc = spec.add_code(acc, term)
        return spec.el(acc)

    def compose(self, subs: Sequence[MultiPoly]) -> MultiPoly:
        """Substitute variable j by subs[j]; all subs share one arity."""
        if len(subs) != self.num_vars:
            raise DimensionMismatch("need one substitute per variable")
        if not subs:
            raise InvalidOperand("composition needs at least one variable")
        out_vars = subs[0].num_vars
        acc = MultiPoly.zero(self.spec, out_vars)
        pow_cache: list[dict[int, MultiPoly]] = [dict() for _ in subs]
        for e, c in self.coeffs.items():
            term = MultiPoly.constant(self.spec, out_vars, c)
            for j, ej in enumerate(e):
                if ej:
                    cache = pow_cache[j]
                    p = cache.get(ej)
                    if p is None:
                        p = subs[j].pow(ej)
                        cache[ej] = p
                    term = term * p
            acc = acc + term
        return acc

    def to_json(self) -> list:
        return [[list(e), c] for e, c in self.canonical()]

    @staticmethod
    def from_json(spec: FieldSpec, num_vars: int, data: Sequence) -> MultiPoly:
        coeffs = {tuple(int(v) for v in e): spec.el(int(c)) for e, c in data}
        return MultiPoly(spec, num_vars, coeffs)


class CoordInjection:
    """The injection pi: {1..n} -> {0..h-1}^m and its Lagrange expansion.

    pi(i) is i-1 written in base h, least significant digit first, padded to m
    digits.  coord_expand(x) is the length-n vector whose i-th component is
    the Lagrange product selecting pi(i), so on grid points it is the indicator
    of the matching position.
    """

    def __init__(self, spec: FieldSpec, n: int, h: int, m: int):
        if h < 1 or h > spec.q:
            raise InvalidOperand(f"need 1 <= h <= q, got h={h}, q={spec.q}")
        if h**m < n:
            raise InvalidOperand(f"h^m = {h**m} cannot index {n} positions")
        self.spec = spec
        self.n = n
        self.h = h
        self.m = m
        self.grid = [spec.el(k) for k in range(h)]
        digits = []
        for i in range(n):
            v, rest = [], i
            for _ in range(m):
                v.append(rest % h)
                rest //= h
            digits.append(tuple(v))
        self.digit_table = digits
        # Denominators prod_{k != d} (d - k) are shared across positions.
        self._denom_inv = [
            self._lagrange_denominator(d).inverse() for d in range(h)
        ]

    def _lagrange_denominator(self, d: int) -> FieldElement:
        acc = self.spec.one
        for k in range(self.h):
            if k != d:
                acc = acc * (self.grid[d] - self.grid[k])
        return acc

    def pi(self, i: int) -> tuple[int, ...]:
        """Digit vector of position i (1-based)."""
        if not 1 <= i <= self.n:
            raise InvalidOperand(f"position {i} outside 1..{self.n}")
        return self.digit_table[i - 1]

    def pi_point(self, i: int) -> Point:
        return tuple(self.grid[d] for d in self.pi(i))

    def coord_expand(self, x: Sequence[FieldElement]) -> tuple[FieldElement, ...]:
        if len(x) != self.m:
            raise DimensionMismatch(f"point arity {len(x)}, expected {self.m}")
        # numerators prod_{k != d} (k - x_j), one per (variable, digit)
        numer = []
        for j in range(self.m):
            per_digit = []
            for d in range(self.h):
                acc = self.spec.one
                for k in range(self.h):
                    if k != d:
                        acc = acc * (self.grid[k] - x[j])
                per_digit.append(acc)
            numer.append(per_digit)
        sign = self.spec.lift(-1) ** (self.h - 1)  # (k - x) vs (x - k) parity, reused below
        out = []
        for i in range(self.n):
            acc = self.spec.one
            for j, d in enumerate(self.digit_table[i]):
                # denominator is prod (k - d) = (-1)^(h-1) prod (d - k)
                acc = acc * numer[j][d] * self._denom_inv[d] * sign
            out.append(acc)
        return tuple(out)

    def lagrange_basis_poly(self, i: int) -> MultiPoly:
        """The m-variate polynomial x -> coord_expand(x)[i-1]."""
        acc = MultiPoly.constant(self.spec, self.m, self.spec.one)
        for j, d in enumerate(self.pi(i)):
            xj = MultiPoly.variable(self.spec, self.m, j)
            factor = MultiPoly.constant(self.spec, self.m, self.spec.one)
            for k in range(self.h):
                if k != d:
                    k_el = MultiPoly.constant(self.spec, self.m, self.grid[k])
                    factor = factor * (k_el - xj)
            scale = self._denom_inv[d] * (self.spec.lift(-1) ** (self.h - 1))
            acc = acc * factor.scale(scale)
        return acc

    def encode(self, a: Sequence[FieldElement]) -> MultiPoly:
        """The low-degree encoding g_a with g_a(pi(i)) = a_i."""
        if len(a) != self.n:
            raise LengthMismatch(f"assignment length {len(a)}, expected {self.n}")
        acc = MultiPoly.zero(self.spec, self.m)
        for i, ai in enumerate(a, start=1):
            if ai.code:
                acc = acc + self.lagrange_basis_poly(i).scale(ai)
        return MultiPoly(
            acc.spec,
            acc.num_vars,
            acc.coeffs,
            per_var_bound=self.h - 1,
            total_bound=(self.h - 1) * self.m,
        )

    @property
    def degree(self) -> int:
        """Total-degree bound h*m used when validating answers (loose but canonical)."""
        return self.h * self.m


@dataclass(frozen=True)
class AffineSubspace:
    """Affine subspace of GF(q)^m of dimension 0, 1, or 2, in canonical form.

    Canonical form: direction rows in reduced echelon form, base point reduced
    so its pivot coordinates vanish.  Build through the `make` classmethod so
    equality of subspaces coincides with equality of representations.
    """

    base: Point
    directions: tuple[Point, ...]

    @staticmethod
    def make(base: Sequence[FieldElement], directions: Sequence[Sequence[FieldElement]]) -> AffineSubspace:
        spec = base[0].spec
        m = len(base)
        for d in directions:
            if len(d) != m:
                raise DimensionMismatch("direction arity differs from base point")
        rows = mat_rref(directions) if directions else []
        if directions and len(rows) != len(list(directions)):
            raise InvalidOperand("direction vectors must be linearly independent")
        if len(rows) > 2:
            raise InvalidOperand("only dimensions 0..2 are supported")
        newbase = list(base)
        for r in rows:
            pivot = next(i for i, v in enumerate(r) if v)
            c = newbase[pivot]
            if c:
                newbase = [x - c * y for x, y in zip(newbase, r)]
        return AffineSubspace(tuple(newbase), tuple(rows))

    @property
    def spec(self) -> FieldSpec:
        return self.base[0].spec

    @property
    def ambient_dim(self) -> int:
        return len(self.base)

    @property
    def dim(self) -> int:
        return len(self.directions)

    def parametrize(self, params: Sequence[FieldElement]) -> Point:
        if len(params) != self.dim:
            raise DimensionMismatch(f"need {self.dim} parameters")
        out = list(self.base)
        for t, d in zip(params, self.directions):
            out = [x + t * y for x, y in zip(out, d)]
        return tuple(out)

    def points(self) -> Iterator[Point]:
        spec = self.spec
        if spec.q**self.dim > MAX_ENUM:
            raise DimensionCap("subspace too large to enumerate")
        for code in range(spec.q**self.dim):
            params, c = [], code
            for _ in range(self.dim):
                params.append(spec.el(c % spec.q))
                c //= spec.q
            yield self.parametrize(params)

    def locate(self, x: Sequence[FieldElement]) -> tuple[FieldElement, ...] | None:
        """Parameters at which the subspace passes through x, or None."""
        if len(x) != self.ambient_dim:
            raise DimensionMismatch("point arity differs from ambient dimension")
        if self.dim == 0:
            return () if tuple(x) == self.base else None
        cols = [[d[i] for d in self.directions] for i in range(self.ambient_dim)]
        rhs = [xi - bi for xi, bi in zip(x, self.base)]
        sol = mat_solve(cols, rhs)
        if sol is None:
            return None
        if self.parametrize(sol) != tuple(x):
            return None
        return sol

    def __contains__(self, x: Sequence[FieldElement]) -> bool:
        return self.locate(x) is not None

    def to_json(self) -> dict:
        return {
            "base": [e.code for e in self.base],
            "directions": [[e.code for e in d] for d in self.directions],
        }

    @staticmethod
    def from_json(spec: FieldSpec, obj: dict) -> AffineSubspace:
        base = codes_point(spec, obj["base"])
        dirs = [codes_point(spec, d) for d in obj["directions"]]
        return AffineSubspace.make(base, dirs)


def point_subspace(x: Sequence[FieldElement]) -> AffineSubspace:
    """Dimension-0 subspace at x."""
    return AffineSubspace.make(tuple(x), ())


def restrict_to_subspace(g: MultiPoly, s: AffineSubspace) -> MultiPoly:
    """The polynomial in s's parameters representing g on s."""
    if g.num_vars != s.ambient_dim:
        raise DimensionMismatch("polynomial arity differs from ambient dimension")
    spec = g.spec
    k = s.dim
    if k == 0:
        val = g.eval(s.base)
        return MultiPoly(spec, 0, {(): val} if val.code else {})
    subs = []
    for j in range(g.num_vars):
        coeffs: dict[tuple[int, ...], FieldElement] = {(0,) * k: s.base[j]}
        for i, d in enumerate(s.directions):
            e = tuple(1 if a == i else 0 for a in range(k))
            coeffs[e] = d[j]
        subs.append(MultiPoly(spec, k, coeffs))
    return g.compose(subs)


@dataclass(frozen=True)
class Curve:
    """Parametric curve GF(q) -> GF(q)^m given componentwise by univariate polys."""

    components: tuple[MultiPoly, ...]
    degree: int

    def __post_init__(self):
        for c in self.components:
            if c.num_vars != 1:
                raise DimensionMismatch("curve components must be univariate")
            if c.total_degree() > self.degree:
                raise InvalidOperand("declared curve degree below actual degree")

    @property
    def spec(self) -> FieldSpec:
        return self.components[0].spec

    @property
    def ambient_dim(self) -> int:
        return len(self.components)

    def at(self, t: FieldElement) -> Point:
        return tuple(c.eval((t,)) for c in self.components)

    def to_json(self) -> dict:
        return {"degree": self.degree, "components": [c.to_json() for c in self.components]}

    @staticmethod
    def from_json(spec: FieldSpec, obj: dict) -> Curve:
        comps = tuple(
            MultiPoly.from_json(spec, 1, c) for c in obj["components"]
        )
        return Curve(comps, int(obj["degree"]))


def curve_through(points: Sequence[Point]) -> Curve:
    """Lowest-degree curve through the points at parameters 0, 1, ..., l-1.

    Parameter values are the first l element codes, so callers can recover the
    location of point i as the code-i parameter.
    """
    if not points:
        raise InvalidOperand("a curve needs at least one point")
    spec = points[0][0].spec
    ell = len(points)
    if ell > spec.q:
        raise TooManyPoints(f"{ell} points but only {spec.q} parameter values")
    m = len(points[0])
    params = [spec.el(i) for i in range(ell)]
    comps = []
    for j in range(m):
        comps.append(_lagrange_univariate(params, [pt[j] for pt in points]))
    return Curve(tuple(comps), max(ell - 1, 0))


def _lagrange_univariate(ts: Sequence[FieldElement], vals: Sequence[FieldElement]) -> MultiPoly:
    spec = ts[0].spec
    acc = MultiPoly.zero(spec, 1)
    x = MultiPoly.variable(spec, 1, 0)
    for i, (ti, vi) in enumerate(zip(ts, vals)):
        if not vi:
            continue
        term = MultiPoly.constant(spec, 1, spec.one)
        denom = spec.one
        for k, tk in enumerate(ts):
            if k != i:
                term = term * (x - MultiPoly.constant(spec, 1, tk))
                denom = denom * (ti - tk)
        acc = acc + term.scale(vi * denom.inverse())
    return acc


def restrict_to_curve(g: MultiPoly, curve: Curve) -> MultiPoly:
    """Univariate polynomial t -> g(curve(t))."""
    if g.num_vars != curve.ambient_dim:
        raise DimensionMismatch("polynomial arity differs from curve ambient dimension")
    return g.compose(list(curve.components))


# -- variable substitution (keeps curve answers short) --


def subst_width(d: int) -> int:
    """Number of substituted variables needed for degrees up to d."""
    if d < 1:
        raise InvalidOperand("substitution needs d >= 1")
    w = 1
    while (1 << w) < d + 1:
        w += 1
    return w


def subst_map(x: FieldElement, d: int) -> Point:
    """The point (x, x^2, x^4, ...) with subst_width(d) entries."""
    return tuple(x ** (1 << i) for i in range(subst_width(d)))


def subst_rewrite(f: MultiPoly, d: int) -> MultiPoly:
    """Rewrite a univariate poly of degree <= d as a multilinear polynomial in
    the substituted variables, via binary digits of each exponent."""
    if f.num_vars != 1:
        raise DimensionMismatch("substitution applies to univariate polynomials")
    if f.total_degree() > d:
        raise InvalidOperand(f"degree {f.total_degree()} exceeds declared bound {d}")
    w = subst_width(d)
    coeffs: dict[tuple[int, ...], FieldElement] = {}
    for (k,), c in f.coeffs.items():
        e = tuple((k >> i) & 1 for i in range(w))
        acc = coeffs.get(e)
        coeffs[e] = c if acc is None else acc + c
    return MultiPoly(f.spec, w, coeffs)


# -- question sampling and Schwartz-Zippel accounting --


def sample_plane_point(rng, spec: FieldSpec, m: int) -> tuple[AffineSubspace, Point]:
    """Uniform 2-dimensional affine subspace of GF(q)^m and a uniform point on it.

    Ordered independent direction pairs are equidistributed over planes, and a
    uniform ambient base point is equidistributed over cosets, so rejection
    sampling below is exactly uniform.
    """
    if m < 2:
        raise InvalidOperand("plane sampling needs m >= 2")
    q = spec.q

    def rand_point() -> Point:
        return tuple(spec.el(int(rng.integers(q))) for _ in range(m))

    while True:
        d1 = rand_point()
        if any(d1):
            break
    while True:
        d2 = rand_point()
        if len(mat_rref([d1, d2])) == 2:
            break
    s = AffineSubspace.make(rand_point(), [d1, d2])
    t1, t2 = spec.el(int(rng.integers(q))), spec.el(int(rng.integers(q)))
    return s, s.parametrize((t1, t2))


def enumerate_points(spec: FieldSpec, m: int) -> list[Point]:
    """All points of GF(q)^m in code-lexicographic order (last coordinate fastest)."""
    if spec.q**m > MAX_ENUM:
        raise DimensionCap("domain too large to enumerate")
    out = []
    for code in range(spec.q**m):
        pt, c = [], code
        for _ in range(m):
            pt.append(spec.el(c % spec.q))
            c //= spec.q
        pt.reverse()
        out.append(tuple(pt))
    return out


def num_affine_planes(spec: FieldSpec, m: int) -> int:
    """Count of 2-dimensional affine subspaces of GF(q)^m."""
    if m < 2:
        return 0
    q = spec.q
    linear = (q**m - 1) * (q**m - q) // ((q**2 - 1) * (q**2 - q))
    return linear * q ** (m - 2)


def enumerate_planes(spec: FieldSpec, m: int) -> list[AffineSubspace]:
    """All 2-dimensional affine subspaces of GF(q)^m, deterministically ordered."""
    if m < 2:
        raise InvalidOperand("planes need m >= 2")
    if spec.q ** (2 * m) > MAX_ENUM:
        raise DimensionCap("too many direction pairs to enumerate")
    points = enumerate_points(spec, m)
    nonzero = [p for p in points if any(p)]
    linear = set()
    for d1 in nonzero:
        for d2 in nonzero:
            rows = mat_rref([d1, d2])
            if len(rows) == 2:
                linear.add(tuple(rows))
    planes = set()
    for dirs in linear:
        for base in points:
            planes.add(AffineSubspace.make(base, list(dirs)))
    return sorted(planes, key=lambda s: str(s.to_json()))


def count_zeros(g: MultiPoly) -> int:
    """Exhaustive zero count; raises on the zero polynomial."""
    if g.is_zero():
        raise ZeroPolynomial("zero polynomial vanishes everywhere")
    spec = g.spec
    if spec.q**g.num_vars > MAX_ENUM:
        raise DimensionCap("domain too large for exhaustive zero counting")
    zeros = 0
    for code in range(spec.q**g.num_vars):
        pt, c = [], code
        for _ in range(g.num_vars):
            pt.append(spec.el(c % spec.q))
            c //= spec.q
        if not g.eval(pt):
            zeros += 1
    return zeros
