"""Linear-function proof oracles and the value-emitting summation game.

A LinearProof is an oracle table over all of GF(q)^n whose honest form is
Pi(u) = u.a; lin_test checks such a table against a claimed value b.a = c
with a constant number of counted oracle reads (linearity, self-corrected
value, consistency with the low-degree encoding g_a).  sum_game embeds that
test into a k-prover game on a CSS codestate: the provers' shares route
through the hidden-codeword composite exactly as in the membership game, and
a fourth round emits +/-1 values whose expectation over honest play equals
the tensor Pauli observable named by the query vectors.

Question formats added by this module (b is a tuple of field elements, W a
basis tag, f a check flavor in {"val", "enc", "blr"}):

    ("ajoint", b, outer_q, inner_q)
                             joint broadcast query: a bare restriction
                             question plus a proof-extension question.
                             Answer: pair (outer answer, inner answer).
    ("bg", b, base_q)        entangled low-degree question with b announced.
    ("bh", b, W, base_q)     proof-extension low-degree question; the bare
                             base_q carries no basis, so W rides along.
    ("cpt", b, W, f, y, y')  point-consistency probe; y may be None when the
                             flavor reads no encoding point.  Answer: value
                             or pair of values.
    ("ccrv", b, W, f, gdesc, pdesc)
                             curve query; each desc is (outer curve,
                             substituted curve, degree bound, decode params).
                             Answer: substituted restriction polynomial(s),
                             prefixed by a claimed value for flavor "val".
    ("ceval", b, W, f, gev, pev)
                             broadcast evaluation query; each ev is (curve,
                             degree bound, point).  Answer: value(s).
    ("dq", b_j, W, f, gdesc, pdesc)
                             per-prover value round: answer is (claimed
                             value, substituted restriction polynomial(s)).

As everywhere in the game layer, malformed answers reject rather than raise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .css import CssCode, _special_candidates, all_routings, composite_answer, encode_state, logical_zero
from .errors import (
    BudgetExceeded,
    DimensionCap,
    EprLabError,
    FormatMismatch,
    InvalidOperand,
    LengthMismatch,
    SpecMismatch,
    UnsupportedPrime,
)
from .games import (
    DEFAULT_BUDGET,
    Game,
    MeasurementPlan,
    Strategy,
    WEIGHT_ATOL,
    _joint_distribution,
    _valid_plane_answer,
    _valid_value_answer,
    clowdeg_game,
    encode_plane_answer,
    inner_injection,
    plan_from_measurement,
    honest_plan_resolver,
    qlowdeg_game,
)
from .gf import FieldElement, FieldSpec, vec_add, vec_dot, vec_neg
from .qsim import StateVec, apply_to_sites, basis_measurement
from .rmpoly import (
    CoordInjection,
    Curve,
    MultiPoly,
    Point,
    curve_through,
    enumerate_planes,
    enumerate_points,
    point_subspace,
    restrict_to_curve,
    restrict_to_subspace,
    subst_map,
    subst_rewrite,
    subst_width,
)

MAX_TABLE = 1 << 16
MAX_READS = 8
MAX_VALUE_ENTRIES = 1 << 20


# -- linear proof oracles --


def _table_index(u: Sequence[FieldElement]) -> int:
    # first coordinate most significant, matching point enumeration order
    idx = 0
    for x in u:
        idx = idx * x.spec.q + x.code
    return idx


@dataclass(frozen=True)
class LinearProof:
    """Oracle table over GF(q)^n; honest tables back a remembered vector a."""

    spec: FieldSpec
    n: int
    table: tuple[FieldElement, ...]
    vector: tuple[FieldElement, ...] | None

    def __post_init__(self):
        if self.n < 1:
            raise InvalidOperand("proof needs at least one variable")
        if len(self.table) != self.spec.q**self.n:
            raise LengthMismatch(
                f"table has {len(self.table)} entries, expected {self.spec.q ** self.n}"
            )
        if any(x.spec != self.spec for x in self.table):
            raise SpecMismatch("table entries over a different field")
        if self.vector is not None and len(self.vector) != self.n:
            raise LengthMismatch("backing vector length differs from the arity")

    @property
    def is_honest(self) -> bool:
        return self.vector is not None

    def lookup(self, u: Sequence[FieldElement]) -> FieldElement:
        if len(u) != self.n:
            raise LengthMismatch(f"query of length {len(u)}, table arity {self.n}")
        return self.table[_table_index(u)]


def build_proof(a: Sequence[FieldElement], b: Sequence[FieldElement]) -> LinearProof:
    """Honest table for the vector a: every entry is u.a.

    The target vector b does not influence the table; it is validated here so
    a proof is always built against a concrete claim shape.
    """
    a, b = tuple(a), tuple(b)
    if not a:
        raise InvalidOperand("empty vector")
    if len(a) != len(b):
        raise LengthMismatch(f"vector lengths {len(a)} and {len(b)} differ")
    spec = a[0].spec
    if any(x.spec != spec for x in a + b):
        raise SpecMismatch("vectors mix field specs")
    n = len(a)
    if spec.q**n > MAX_TABLE:
        raise DimensionCap(f"table of {spec.q ** n} entries exceeds {MAX_TABLE}")
    table = tuple(vec_dot(u, a) for u in enumerate_points(spec, n))
    return LinearProof(spec, n, table, a)


def adversarial_proof(spec: FieldSpec, n: int, table: Sequence[FieldElement]) -> LinearProof:
    """Explicit table with no backing vector, for soundness fixtures."""
    if spec.q**n > MAX_TABLE:
        raise DimensionCap(f"table of {spec.q ** n} entries exceeds {MAX_TABLE}")
    return LinearProof(spec, n, tuple(table), None)


def dump_proof(proof: LinearProof) -> str:
    """Text form: "p t n" then one "index digits" line per table entry.

    Digits are power-basis coefficients, low power first, like the code
    matrix format.
    """
    spec = proof.spec
    lines = [f"{spec.p} {spec.t} {proof.n}"]
    for idx, x in enumerate(proof.table):
        code, digits = x.code, []
        for _ in range(spec.t):
            digits.append(str(code % spec.p))
            code //= spec.p
        lines.append(f"{idx} {''.join(digits)}")
    return "\n".join(lines) + "\n"


def load_proof(text: str) -> LinearProof:
    """Parse dump_proof output; the result is always adversarial-mode."""
    from .gf import field

    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatMismatch("empty proof text")
    head = lines[0].split()
    if len(head) != 3:
        raise FormatMismatch(f"header {lines[0]!r} is not 'p t n'")
    try:
        p, t, n = (int(x) for x in head)
        spec = field(p, t)
    except (ValueError, EprLabError) as exc:
        raise FormatMismatch(f"bad field header: {exc}") from exc
    if n < 1 or spec.q**n > MAX_TABLE:
        raise FormatMismatch(f"arity {n} outside the supported table sizes")
    size = spec.q**n
    entries: dict[int, FieldElement] = {}
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2 or len(parts[1]) != spec.t:
            raise FormatMismatch(f"line {ln!r} is not 'index digits'")
        try:
            idx = int(parts[0])
        except ValueError as exc:
            raise FormatMismatch(f"bad index in {ln!r}") from exc
        if not 0 <= idx < size or idx in entries:
            raise FormatMismatch(f"index {idx} out of range or repeated")
        code = 0
        for ch in reversed(parts[1]):
            if not ch.isdigit() or int(ch) >= p:
                raise FormatMismatch(f"bad digit string {parts[1]!r}")
            code = code * p + int(ch)
        entries[idx] = spec.el(code)
    if len(entries) != size:
        raise FormatMismatch(f"{len(entries)} entries for a table of {size}")
    return LinearProof(spec, n, tuple(entries[i] for i in range(size)), None)


def proof_injection(spec: FieldSpec, n: int, h: int = 2) -> CoordInjection:
    """Injection indexing the q^n table positions for the proof extension.

    The variable count is the least m with h^m covering the table, padded to
    2 so the position domain supports planes and the classical test.
    """
    if n < 1:
        raise InvalidOperand("proof needs at least one variable")
    size = spec.q**n
    if size > MAX_TABLE:
        raise DimensionCap(f"table of {size} entries exceeds {MAX_TABLE}")
    m = 2
    while h**m < size:
        m += 1
    return CoordInjection(spec, size, h, m)


# -- the constant-query test --


@dataclass(frozen=True)
class LinTestSpec:
    """Target vector, claimed value, read budget, and the encoding domain."""

    b: tuple[FieldElement, ...]
    claimed: FieldElement
    inj: CoordInjection
    budget: int = MAX_READS

    def __post_init__(self):
        if not self.b:
            raise InvalidOperand("empty target vector")
        spec = self.b[0].spec
        if any(x.spec != spec for x in self.b) or self.claimed.spec != spec:
            raise SpecMismatch("target and claim mix field specs")
        if self.inj.spec != spec:
            raise SpecMismatch("injection over a different field")
        if self.inj.n != len(self.b):
            raise LengthMismatch(
                f"injection indexes {self.inj.n} coordinates, target has {len(self.b)}"
            )
        if not 1 <= self.budget <= MAX_READS:
            raise InvalidOperand(f"budget {self.budget} outside 1..{MAX_READS}")


def _rand_vector(rng: np.random.Generator, spec: FieldSpec, n: int) -> tuple[FieldElement, ...]:
    return tuple(spec.el(int(rng.integers(spec.q))) for _ in range(n))


def lin_test(
    proof: LinearProof,
    g_oracle: Callable[[Point], FieldElement],
    test: LinTestSpec,
    rng: np.random.Generator,
) -> bool:
    """One execution of the three-check linear test; True means accept.

    Checks, each on fresh uniform randomness: table linearity at a random
    pair, the claimed value via self-correction at the target, and agreement
    with g through the coordinate expansion at a random encoding point.  All
    reads happen (no short-circuiting), are counted, and raise
    BudgetExceeded rather than pass the declared budget.
    """
    spec = proof.spec
    if test.b[0].spec != spec:
        raise SpecMismatch("test targets a different field")
    if len(test.b) != proof.n:
        raise LengthMismatch("target length differs from the table arity")
    n = proof.n
    u1 = _rand_vector(rng, spec, n)
    v1 = _rand_vector(rng, spec, n)
    u2 = _rand_vector(rng, spec, n)
    x = _rand_vector(rng, spec, test.inj.m)
    u3 = _rand_vector(rng, spec, n)
    reads = 0

    def counted(fetch: Callable[[], FieldElement]) -> FieldElement:
        nonlocal reads
        reads += 1
        if reads > test.budget:
            raise BudgetExceeded(f"{reads} oracle reads pass the budget {test.budget}")
        return fetch()

    linear = (
        counted(lambda: proof.lookup(u1)) + counted(lambda: proof.lookup(v1))
        == counted(lambda: proof.lookup(vec_add(u1, v1)))
    )
    value = (
        counted(lambda: proof.lookup(u2))
        + counted(lambda: proof.lookup(vec_add(test.b, vec_neg(u2))))
        == test.claimed
    )
    xpi = test.inj.coord_expand(x)
    encoding = (
        counted(lambda: proof.lookup(u3))
        + counted(lambda: proof.lookup(vec_add(xpi, vec_neg(u3))))
        == counted(lambda: g_oracle(x))
    )
    return linear and value and encoding


# -- the summation game --


@dataclass(frozen=True)
class SumParams:
    """Construction knobs for sum_game.

    inj fixes the register encoding; d defaults to its canonical degree.
    outer_level and inner_level pick the plain or composed variant of the
    entangled and proof-extension tests.  proof_h overrides the grid size of
    the proof extension (default: the register injection's).  part_weights
    splits the game mass over the four rounds; zero-weight parts are
    omitted.
    """

    inj: CoordInjection
    d: int | None = None
    outer_level: int = 1
    inner_level: int = 1
    proof_h: int | None = None
    part_weights: tuple[float, float, float, float] = (0.25, 0.25, 0.25, 0.25)

    def __post_init__(self):
        if self.outer_level not in (1, 2) or self.inner_level not in (1, 2):
            raise InvalidOperand("levels must be 1 or 2")
        if len(self.part_weights) != 4 or any(w < 0 for w in self.part_weights):
            raise InvalidOperand("part weights must be four nonnegative numbers")
        if abs(sum(self.part_weights) - 1.0) > WEIGHT_ATOL:
            raise InvalidOperand(f"part weights sum to {sum(self.part_weights)}")


@dataclass(frozen=True)
class SumGame(Game):
    """The four-round game plus the data needed to evaluate emissions."""

    wtag: str
    bs: tuple[tuple[FieldElement, ...], ...]
    params: SumParams
    emission: Callable[[tuple, tuple], float | None]
    claimed_total: Callable[[tuple, tuple], FieldElement | None]


_BARE_TAGS = ("plane", "point", "pair")

# the value round only draws checks that tie the answers to the claim or the
# encoding; the linearity check stays in the curve round
_VALUE_FLAVORS = ("val", "enc")


def _flavors(spec: FieldSpec) -> tuple[str, ...]:
    # the linearity check routes three positions through one curve, which
    # needs three parameter values; the other checks need two
    return ("val", "enc", "blr") if spec.q >= 3 else ("val", "enc")


def _route_through(pts: Sequence[Point], deg_bound: int):
    """Curve pair and decode parameters covering an ordered query list."""
    spec = pts[0][0].spec
    uniq: list[Point] = []
    where: dict[Point, int] = {}
    for pt in pts:
        if pt not in where:
            where[pt] = len(uniq)
            uniq.append(pt)
    c1 = curve_through(uniq)
    big = max(1, deg_bound * c1.degree)
    c2 = curve_through([subst_map(spec.el(i), big) for i in range(len(uniq))])
    params = tuple(spec.el(where[pt]) for pt in pts)
    return (c1, c2, big, params)


def _valid_subst_answer(spec: FieldSpec, w: int, ans: object) -> bool:
    return (
        isinstance(ans, MultiPoly)
        and ans.spec == spec
        and ans.num_vars == w
        and all(ans.var_degree(j) <= 1 for j in range(w))
    )


def _split_components(answers: Sequence[object], special: int, width: int) -> list[list[object]]:
    """Per-component answer lists for composite-combining tuple answers."""
    fill = None
    for j, ans in enumerate(answers):
        if j == special:
            continue
        if not (isinstance(ans, tuple) and len(ans) == width):
            raise FormatMismatch(f"expected a {width}-part answer, got {ans!r}")
        if fill is None:
            fill = ans
    assert fill is not None
    return [
        [fill[i] if j == special else answers[j][i] for j in range(len(answers))]
        for i in range(width)
    ]


def _outer_family(
    spec: FieldSpec, inj: CoordInjection, d: int, wtag: str, level: int
) -> list[tuple[tuple, float]]:
    """Question marginal of the restriction test in basis wtag."""
    m = inj.m
    fam: list[tuple[tuple, float]] = []
    if level == 1:
        planes = enumerate_planes(spec, m)
        fam += [(("plane", wtag, s), 0.5 / len(planes)) for s in planes]
    else:
        planes = enumerate_planes(spec, m)
        iplanes = enumerate_planes(spec, inner_injection(spec, d).m)
        wpair = 0.25 / (len(planes) * len(iplanes))
        for s in planes:
            for tsub in iplanes:
                fam.append((("pair", wtag, s, tsub), wpair))
                for y in tsub.points():
                    fam.append((("pair", wtag, s, point_subspace(y)), wpair / spec.q**2))
    fam += [(("point", wtag, x), 0.5 / spec.q**m) for x in enumerate_points(spec, m)]
    return fam


def sum_game(
    css: CssCode,
    wtag: str,
    bs: Sequence[Sequence[FieldElement]],
    params: SumParams,
) -> SumGame:
    """k-prover game tying claimed values b_j.a_j to the routed proofs.

    Round (a) cross-checks the announced-basis restriction answers against
    the joint broadcast measurement; round (b) runs the entangled test and
    the proof-extension test as an equal mixture; round (c) simulates one
    check of the linear test through curves over the position domain; round
    (d) queries every prover on its own vector and emits w^tr(sum of the
    claimed values) when all decodes pass.
    """
    spec = css.spec
    if spec.p != 2:
        raise UnsupportedPrime("the protocol layer is built for characteristic 2")
    if wtag not in ("X", "Z"):
        raise InvalidOperand(f"basis must be X or Z, got {wtag!r}")
    inj = params.inj
    if inj.spec != spec:
        raise SpecMismatch("injection is over a different field than the code")
    k = css.k
    if k < 2:
        raise InvalidOperand("the game needs at least two provers")
    n = inj.n
    bs = tuple(tuple(b) for b in bs)
    if len(bs) != k:
        raise LengthMismatch(f"{len(bs)} query vectors for {k} provers")
    for b in bs:
        if len(b) != n or any(x.spec != spec for x in b):
            raise InvalidOperand("query vectors must have one entry per register coordinate")
    d = params.d if params.d is not None else inj.degree
    pinj = proof_injection(spec, n, params.proof_h if params.proof_h else inj.h)
    dp = pinj.degree
    positions = enumerate_points(spec, n)
    rank = {pt: i for i, pt in enumerate(positions)}
    gpoints = enumerate_points(spec, inj.m)
    expand = {x: inj.coord_expand(x) for x in gpoints}
    routings = [all_routings(css.code, t) for t in range(k)]
    wa, wb, wc, wd = params.part_weights
    flavors = _flavors(spec)
    entries: list[tuple[tuple, float, str]] = []

    def flavor_queries(flavor: str, bvec: tuple[FieldElement, ...]):
        out: list[tuple[tuple[Point, ...], tuple[Point, ...]]] = []
        if flavor == "val":
            for u in positions:
                out.append(((), (u, vec_add(bvec, vec_neg(u)))))
        elif flavor == "enc":
            for x in gpoints:
                for u in positions:
                    out.append(((x,), (u, vec_add(expand[x], vec_neg(u)))))
        else:
            for u in positions:
                for v in positions:
                    out.append(((), (u, v, vec_add(u, v))))
        return out

    def proof_route(p_pts: Sequence[Point]):
        return _route_through([pinj.pi_point(rank[u] + 1) for u in p_pts], dp)

    if wa > 0:
        afam = _outer_family(spec, inj, d, wtag, params.outer_level)
        pplanes = enumerate_planes(spec, pinj.m)
        ifam: list[tuple[tuple, float]] = [
            (("plane", None, s), 0.5 / len(pplanes)) for s in pplanes
        ]
        ifam += [
            (("point", None, y), 0.5 / spec.q**pinj.m)
            for y in enumerate_points(spec, pinj.m)
        ]
        for t in range(k):
            for oq, ow in afam:
                for iq, iw in ifam:
                    cq = ("ajoint", bs[t], oq, iq)
                    qtuple = tuple(oq if j == t else cq for j in range(k))
                    entries.append((qtuple, wa * ow * iw / k, "a"))

    base_g = qlowdeg_game(spec, inj, d, level=params.outer_level)
    base_h = clowdeg_game(spec, pinj.m, dp, level=params.inner_level)
    if wb > 0:
        for (qa, qb), w, br in base_g.questions:
            for t in range(k):
                qtuple = tuple(
                    ("bg", bs[t], qa) if j == t else ("bg", bs[t], qb) for j in range(k)
                )
                entries.append((qtuple, wb * 0.5 * w / k, "bg:" + br))
        for (qa, qb), w, br in base_h.questions:
            for t in range(k):
                qtuple = tuple(
                    ("bh", bs[t], wtag, qa) if j == t else ("bh", bs[t], wtag, qb)
                    for j in range(k)
                )
                entries.append((qtuple, wb * 0.5 * w / k, "bh:" + br))

    if wc > 0:
        for t in range(k):
            bvec = bs[t]
            for flavor in flavors:
                draws = flavor_queries(flavor, bvec)
                dmass = wc / (k * len(flavors) * len(draws))
                for g_pts, p_pts in draws:
                    pdesc = proof_route(p_pts)
                    gdesc = _route_through(list(g_pts), d) if g_pts else None
                    gpars = tuple(spec.elements()) if g_pts else (None,)
                    span = spec.q * len(gpars)
                    for tp in spec.elements():
                        pev = (pdesc[0], pdesc[2], subst_map(tp, pdesc[2]))
                        ppoint = pdesc[0].at(tp)
                        for tg in gpars:
                            if g_pts:
                                gev = (gdesc[0], gdesc[2], subst_map(tg, gdesc[2]))
                                sq = ("cpt", bvec, wtag, flavor, gdesc[0].at(tg), ppoint)
                            else:
                                gev = None
                                sq = ("cpt", bvec, wtag, flavor, None, ppoint)
                            cq = ("ceval", bvec, wtag, flavor, gev, pev)
                            qtuple = tuple(sq if j == t else cq for j in range(k))
                            entries.append(
                                (qtuple, dmass / 2 / span, f"c:{flavor}-pt")
                            )
                    for tp in spec.elements():
                        pev = (pdesc[0], pdesc[2], pdesc[1].at(tp))
                        for tg in gpars:
                            gev = (gdesc[0], gdesc[2], gdesc[1].at(tg)) if g_pts else None
                            sq = ("ccrv", bvec, wtag, flavor, gdesc, pdesc)
                            cq = ("ceval", bvec, wtag, flavor, gev, pev)
                            qtuple = tuple(sq if j == t else cq for j in range(k))
                            entries.append(
                                (qtuple, dmass / 2 / span, f"c:{flavor}-crv")
                            )

    def claimed_total(questions: tuple, answers: tuple) -> FieldElement | None:
        total = spec.zero
        for qj, aj in zip(questions, answers):
            flavor, gdesc, pdesc = qj[3], qj[4], qj[5]
            if flavor == "val":
                if not (isinstance(aj, tuple) and len(aj) == 2):
                    return None
                c, rp = aj
                r = None
            else:
                if not (isinstance(aj, tuple) and len(aj) == 3):
                    return None
                c, r, rp = aj
            if not _valid_value_answer(spec, c):
                return None
            if not _valid_subst_answer(spec, subst_width(pdesc[2]), rp):
                return None
            probes = [subst_map(par, pdesc[2]) for par in pdesc[3]]
            got = rp.eval(probes[0]) + rp.eval(probes[1])
            if flavor == "val":
                if got != c:
                    return None
            else:
                if not _valid_subst_answer(spec, subst_width(gdesc[2]), r):
                    return None
                if got != r.eval(subst_map(gdesc[3][0], gdesc[2])):
                    return None
            total = total + c
        return total

    def part_d_value(questions: tuple, answers: tuple) -> float | None:
        total = claimed_total(questions, answers)
        if total is None:
            return None
        return 1.0 if total.trace() == 0 else -1.0

    if wd > 0:
        # one verifier draw shared by every prover per round; positions differ
        # across provers only through their own query vectors
        shared: list[tuple[str, tuple[tuple[tuple, tuple], ...]]] = []
        count = 0
        for flavor in _VALUE_FLAVORS:
            rows = tuple(zip(*(flavor_queries(flavor, bs[j]) for j in range(k))))
            shared.append((flavor, rows))
            count += len(rows)
        if count > MAX_VALUE_ENTRIES:
            raise BudgetExceeded(
                f"{count} value-round question tuples exceed {MAX_VALUE_ENTRIES}"
            )
        for flavor, rows in shared:
            w_each = wd / (len(_VALUE_FLAVORS) * len(rows))
            for row in rows:
                qtuple = []
                for j, (g_pts, p_pts) in enumerate(row):
                    gdesc = _route_through(list(g_pts), d) if g_pts else None
                    qtuple.append(("dq", bs[j], wtag, flavor, gdesc, proof_route(p_pts)))
                entries.append((tuple(qtuple), w_each, "d"))

    merged: dict[tuple[tuple, str], float] = {}
    order: list[tuple[tuple, str]] = []
    for qtuple, w, br in entries:
        key = (qtuple, br)
        if key not in merged:
            merged[key] = 0.0
            order.append(key)
        merged[key] += w
    final = tuple((qt, merged[(qt, br)], br) for qt, br in order)

    inner_bound = inner_injection(spec, d).m

    def outer_valid(outer_q: tuple, ans: object) -> bool:
        if outer_q[0] == "plane":
            return _valid_plane_answer(spec, d, ans)
        if outer_q[0] == "pair" and outer_q[3].dim == 2:
            return _valid_plane_answer(spec, inner_bound, ans)
        return _valid_value_answer(spec, ans)

    def check_a(questions: tuple, answers: tuple, t: int, routing) -> float:
        try:
            cols = _split_components(answers, routing.special, 2)
            comp = composite_answer(cols[0], routing)
        except EprLabError:
            return 0.0
        r = answers[t]
        outer_q = questions[t]
        if not outer_valid(outer_q, r) or not outer_valid(outer_q, comp):
            return 0.0
        return 1.0 if r == comp else 0.0

    def check_c_pt(questions: tuple, answers: tuple, t: int, routing) -> float:
        flavor = questions[t][3]
        sp = answers[t]
        if flavor == "enc":
            if not (isinstance(sp, tuple) and len(sp) == 2):
                return 0.0
            alpha, beta = sp
            if not (_valid_value_answer(spec, alpha) and _valid_value_answer(spec, beta)):
                return 0.0
            try:
                cols = _split_components(answers, routing.special, 2)
                gamma = composite_answer(cols[0], routing)
                delta = composite_answer(cols[1], routing)
            except EprLabError:
                return 0.0
            return 1.0 if alpha == gamma and beta == delta else 0.0
        if not _valid_value_answer(spec, sp):
            return 0.0
        try:
            delta = composite_answer(answers, routing)
        except EprLabError:
            return 0.0
        return 1.0 if sp == delta else 0.0

    def check_c_crv(questions: tuple, answers: tuple, t: int, routing) -> float:
        sq = questions[t]
        cq = questions[(t + 1) % k]
        flavor, gdesc, pdesc = sq[3], sq[4], sq[5]
        gev, pev = cq[4], cq[5]
        sp = answers[t]
        cclaim = r = None
        if flavor == "blr":
            rp = sp
        else:
            if not (isinstance(sp, tuple) and len(sp) == 2):
                return 0.0
            if flavor == "val":
                cclaim, rp = sp
            else:
                r, rp = sp
        if not _valid_subst_answer(spec, subst_width(pdesc[2]), rp):
            return 0.0
        try:
            if flavor == "enc":
                cols = _split_components(answers, routing.special, 2)
                gcomp = composite_answer(cols[0], routing)
                pcomp = composite_answer(cols[1], routing)
            else:
                pcomp = composite_answer(answers, routing)
        except EprLabError:
            return 0.0
        if rp.eval(pev[2]) != pcomp:
            return 0.0
        probes = [subst_map(par, pdesc[2]) for par in pdesc[3]]
        got = rp.eval(probes[0]) + rp.eval(probes[1])
        if flavor == "val":
            if not _valid_value_answer(spec, cclaim):
                return 0.0
            ok = got == cclaim
        elif flavor == "enc":
            if not _valid_subst_answer(spec, subst_width(gdesc[2]), r):
                return 0.0
            if r.eval(gev[2]) != gcomp:
                return 0.0
            ok = got == r.eval(subst_map(gdesc[3][0], gdesc[2]))
        else:
            ok = got == rp.eval(probes[2])
        return 1.0 if ok else 0.0

    def predicate(questions: tuple, answers: tuple) -> float:
        tags = {q[0] for q in questions}
        if tags == {"dq"}:
            return 1.0 if part_d_value(questions, answers) is not None else 0.0
        if tags == {"bg"} or tags == {"bh"}:
            base, qi = (base_g, 2) if tags == {"bg"} else (base_h, 3)
            total, cnt = 0.0, 0
            for t in _special_candidates(questions):
                if bs[t] != questions[t][1]:
                    continue
                other = questions[(t + 1) % k]
                for routing in routings[t]:
                    cnt += 1
                    try:
                        comp = composite_answer(answers, routing)
                    except EprLabError:
                        continue
                    total += base.predicate(
                        (questions[t][qi], other[qi]), (answers[t], comp)
                    )
            return total / cnt if cnt else 0.0
        special = [j for j, q in enumerate(questions) if q[0] in _BARE_TAGS + ("cpt", "ccrv")]
        if len(special) != 1:
            return 0.0
        t = special[0]
        rest = [questions[j] for j in range(k) if j != t]
        if any(q != rest[0] for q in rest):
            return 0.0
        comp_tag = rest[0][0]
        if bs[t] != rest[0][1]:
            return 0.0
        stag = questions[t][0]
        if stag in _BARE_TAGS:
            check = check_a if comp_tag == "ajoint" else None
        elif stag == "cpt":
            check = check_c_pt if comp_tag == "ceval" else None
        else:
            check = check_c_crv if comp_tag == "ceval" else None
        if check is None:
            return 0.0
        total = 0.0
        for routing in routings[t]:
            total += check(questions, answers, t, routing)
        return total / len(routings[t])

    return SumGame(k, final, predicate, wtag, bs, params, part_d_value, claimed_total)


# -- the honest strategy --


def honest_sum_strategy(
    css: CssCode,
    params: SumParams,
    logical_state: StateVec | None = None,
) -> Strategy:
    """Prover j holds site j of every block and answers from one W-basis
    register measurement per round.

    The shared state and layout match the membership game: n register blocks
    plus an ancilla block, all logical zero unless a logical state on n+1
    qudits is supplied.  Every proof-layer answer is classical
    post-processing of the measured register string a: the honest table is
    u.a, its extension interpolates that table, and claimed values are b.a.
    """
    spec = css.spec
    inj = params.inj
    n = inj.n
    k = css.k
    d = params.d if params.d is not None else inj.degree
    pinj = proof_injection(spec, n, params.proof_h if params.proof_h else inj.h)
    dp = pinj.degree
    positions = enumerate_points(spec, n)
    if logical_state is None:
        block = logical_zero(css).vec
        vec = np.array([1.0], dtype=np.complex128)
        for _ in range(n + 1):
            vec = np.kron(vec, block)
        state = StateVec(spec.q, (n + 1) * k, vec)
    else:
        if logical_state.num_sites != n + 1:
            raise InvalidOperand(f"logical state must cover {n + 1} qudits")
        state = encode_state(css, logical_state)
    layout = {j: (tuple(i * k + j for i in range(n)), n * k + j) for j in range(k)}
    base = honest_plan_resolver(spec, inj, d, layout)
    inner_d = inner_injection(spec, d)
    inner_dp = inner_injection(spec, dp)
    wmeas = {w: basis_measurement(spec, w, n) for w in ("X", "Z")}
    g_pool: dict[tuple, MultiPoly] = {}
    h_pool: dict[tuple, MultiPoly] = {}
    sub_pool: dict[tuple, MultiPoly] = {}

    def g_of(a: tuple) -> MultiPoly:
        g = g_pool.get(a)
        if g is None:
            g = inj.encode(a)
            g_pool[a] = g
        return g

    def h_of(a: tuple) -> MultiPoly:
        h = h_pool.get(a)
        if h is None:
            h = pinj.encode(tuple(vec_dot(u, a) for u in positions))
            h_pool[a] = h
        return h

    def curved(a: tuple, which: str, c1: Curve, big: int) -> MultiPoly:
        key = (a, which, c1, big)
        f = sub_pool.get(key)
        if f is None:
            src = g_of(a) if which == "g" else h_of(a)
            f = subst_rewrite(restrict_to_curve(src, c1), big)
            sub_pool[key] = f
        return f

    def outer_answer(a: tuple, outer_q: tuple) -> object:
        if outer_q[0] == "plane":
            return restrict_to_subspace(g_of(a), outer_q[2])
        if outer_q[0] == "point":
            return g_of(a).eval(outer_q[2])
        _, _, s, tsub = outer_q
        return encode_plane_answer(restrict_to_subspace(g_of(a), s), d, inner_d, tsub)

    def inner_answer(a: tuple, inner_q: tuple) -> object:
        if inner_q[0] == "plane":
            return restrict_to_subspace(h_of(a), inner_q[2])
        if inner_q[0] == "point":
            return h_of(a).eval(inner_q[2])
        _, _, s, tsub = inner_q
        return encode_plane_answer(restrict_to_subspace(h_of(a), s), dp, inner_dp, tsub)

    def resolver(player: int, question: tuple) -> MeasurementPlan:
        reg, _ = layout[player]
        tag = question[0]
        if tag == "ajoint":
            _, _, outer_q, inner_q = question
            meas = wmeas[outer_q[1]]
            return plan_from_measurement(
                meas, reg, lambda a: (outer_answer(a, outer_q), inner_answer(a, inner_q))
            )
        if tag == "bg":
            return base(player, question[2])
        if tag == "bh":
            _, _, w, base_q = question
            return plan_from_measurement(
                wmeas[w], reg, lambda a: inner_answer(a, base_q)
            )
        if tag == "cpt":
            _, _, w, flavor, y, yp = question
            if flavor == "enc":
                amap = lambda a: (g_of(a).eval(y), h_of(a).eval(yp))
            else:
                amap = lambda a: h_of(a).eval(yp)
            return plan_from_measurement(wmeas[w], reg, amap)
        if tag == "ccrv":
            _, bvec, w, flavor, gdesc, pdesc = question
            if flavor == "val":
                amap = lambda a: (vec_dot(a, bvec), curved(a, "h", pdesc[0], pdesc[2]))
            elif flavor == "enc":
                amap = lambda a: (
                    curved(a, "g", gdesc[0], gdesc[2]),
                    curved(a, "h", pdesc[0], pdesc[2]),
                )
            else:
                amap = lambda a: curved(a, "h", pdesc[0], pdesc[2])
            return plan_from_measurement(wmeas[w], reg, amap)
        if tag == "ceval":
            _, _, w, flavor, gev, pev = question
            if flavor == "enc":
                amap = lambda a: (
                    curved(a, "g", gev[0], gev[1]).eval(gev[2]),
                    curved(a, "h", pev[0], pev[1]).eval(pev[2]),
                )
            else:
                amap = lambda a: curved(a, "h", pev[0], pev[1]).eval(pev[2])
            return plan_from_measurement(wmeas[w], reg, amap)
        if tag == "dq":
            _, bvec, w, flavor, gdesc, pdesc = question
            if flavor == "val":
                amap = lambda a: (vec_dot(a, bvec), curved(a, "h", pdesc[0], pdesc[2]))
            else:
                amap = lambda a: (
                    vec_dot(a, bvec),
                    curved(a, "g", gdesc[0], gdesc[2]),
                    curved(a, "h", pdesc[0], pdesc[2]),
                )
            return plan_from_measurement(wmeas[w], reg, amap)
        return base(player, question)

    partition = [layout[j][0] + (layout[j][1],) for j in range(k)]
    return Strategy(state, partition, resolver)


# -- evaluators and diagnostics --


@dataclass
class EmissionReport:
    """Value-round statistics: rejected rounds score 0 in expectation."""

    expectation: float
    accept_prob: float
    conditional: float | None


def emitted_expectation(
    game: SumGame, strategy: Strategy, budget: int = DEFAULT_BUDGET
) -> EmissionReport:
    """Exact expectation of the emitted value over the value-emitting round."""
    if strategy.num_players != game.num_players:
        raise InvalidOperand("strategy and game disagree on the player count")
    dq = [(qt, w) for qt, w, br in game.questions if br == "d"]
    total_w = sum(w for _, w in dq)
    if total_w <= 0:
        raise InvalidOperand("the game has no value-emitting entries")
    plans_per_q = []
    cost = 0
    for qtuple, _ in dq:
        plans = [strategy.plan(j, qj) for j, qj in enumerate(qtuple)]
        prod = 1
        for p in plans:
            prod *= len(p.outcomes)
        cost += prod
        if cost > budget:
            raise BudgetExceeded(f"joint outcome count passed {budget}")
        plans_per_q.append(plans)
    expectation = 0.0
    accept = 0.0
    applied_cache: dict = {}
    answer_tables: dict[int, dict] = {}
    for (qtuple, w), plans in zip(dq, plans_per_q):
        tables = []
        for plan in plans:
            tab = answer_tables.setdefault(id(plan), {})
            for lab, _ in plan.outcomes:
                if lab not in tab:
                    tab[lab] = plan.answer(lab)
            tables.append(tab)
        share = w / total_w
        for labels, p in _joint_distribution(strategy.state, plans, applied_cache):
            answers = tuple(tab[lab] for tab, lab in zip(tables, labels))
            val = game.emission(qtuple, answers)
            if val is not None:
                expectation += share * p * val
                accept += share * p
    conditional = expectation / accept if accept > 1e-15 else None
    return EmissionReport(expectation, accept, conditional)


def marginalize_check(game: SumGame, strategy: Strategy) -> float:
    """Worst product-form residual of the joint broadcast measurements.

    For every joint question and broadcast player, groups the outcome
    operators by each answer component and reports
    sum over answer pairs of ||(M - A B)|psi>||^2, maximized over plans.
    Answers of a joint plan must be pairs.  A strategy that post-processes
    one projective measurement factorizes exactly; a genuinely bivariate
    measurement need not.
    """
    worst = 0.0
    seen: set[tuple[int, tuple]] = set()
    for qtuple, _, br in game.questions:
        if br != "a":
            continue
        for j, q in enumerate(qtuple):
            if q[0] != "ajoint" or (j, q) in seen:
                continue
            seen.add((j, q))
            plan = strategy.plan(j, q)
            dim = plan.outcomes[0][1].shape[0]
            firsts: dict[object, np.ndarray] = {}
            seconds: dict[object, np.ndarray] = {}
            joint: dict[tuple, np.ndarray] = {}
            for label, mat in plan.outcomes:
                ans = plan.answer(label)
                if not (isinstance(ans, tuple) and len(ans) == 2):
                    raise InvalidOperand("joint answers must be pairs")
                for store, key in ((firsts, ans[0]), (seconds, ans[1])):
                    store[key] = store.get(key, 0) + mat
                joint[ans] = joint.get(ans, 0) + mat
            resid = 0.0
            for a0, m0 in firsts.items():
                for a1, m1 in seconds.items():
                    diff = joint.get((a0, a1), np.zeros((dim, dim))) - m0 @ m1
                    vec = apply_to_sites(strategy.state, diff, plan.sites)
                    resid += float(np.vdot(vec, vec).real)
            worst = max(worst, resid)
    return worst
