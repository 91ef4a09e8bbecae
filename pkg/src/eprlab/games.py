"""Two-prover nonlocal games and the strategies that play them.

A Game is a finite weighted list of question tuples plus a predicate; a
Strategy owns a shared state, a partition of its sites among the players,
and a resolver mapping each question to a measurement plan on that player's
sites.  exact_value enumerates every joint outcome; mc_value samples.

Question formats used by the protocol games (all hashable):

    ("plane", W, s)          subspace query; W in {"X", "Z", None}, s a
                             2-dimensional AffineSubspace.  Answer: MultiPoly
                             in the two subspace parameters.
    ("point", W, x)          point query at x in GF(q)^m.  Answer: FieldElement.
    ("pair", W, s, t)        composed query: outer plane s plus a subspace t of
                             the coefficient-description domain.  Answer:
                             MultiPoly in t's parameters (dim 2) or a
                             FieldElement (dim 0).
    ("com3", x, z, u, u')    commutation probe naming both points and both
                             field scalings.  Answer: pair of Z_p digits.
    ("msctx", k, i, x, z, u, u')
                             square-context probe, k in {"row", "col"}, i in
                             {0, 1, 2}.  Answer: pair of bits for the first
                             two cells of the context; the third is fixed by
                             the context parity.

The standalone square game uses ("msrow", i), ("mscol", j), ("mscell", i, j).
Malformed answers never raise inside predicates; they simply reject.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, InvalidOperand, UnsupportedPrime
from .gf import FieldElement, FieldSpec, field, self_dual_basis, tr_dot, vec_scale
from .qsim import (
    DenseOp,
    GenObservable,
    ProjMeasurement,
    StateVec,
    apply_raw,
    apply_to_sites,
    epr_state,
    pauli_word,
    root_of_unity,
    subspace_measurement,
    tau,
)
from .rmpoly import (
    AffineSubspace,
    CoordInjection,
    MultiPoly,
    Point,
    enumerate_planes,
    enumerate_points,
    num_affine_planes,
    point_subspace,
    restrict_to_subspace,
)

WEIGHT_ATOL = 1e-12
DEFAULT_BUDGET = 2_000_000


# -- game and strategy containers --


@dataclass(frozen=True)
class Game:
    """A |players|-prover game: weighted question tuples and a predicate.

    Each entry is (questions, weight, branch) where branch is a short tag
    used for per-branch reporting.  The predicate maps (questions, answers)
    to an acceptance probability in [0, 1]; verifier randomness beyond the
    question choice must be folded into that probability.
    """

    num_players: int
    questions: tuple[tuple[tuple, float, str], ...]
    predicate: Callable[[tuple, tuple], float]

    def __post_init__(self):
        total = 0.0
        for qtuple, weight, _ in self.questions:
            if len(qtuple) != self.num_players:
                raise InvalidOperand(f"question tuple {qtuple!r} is not {self.num_players}-long")
            if weight <= 0:
                raise InvalidOperand(f"non-positive weight {weight}")
            total += weight
        if abs(total - 1.0) > WEIGHT_ATOL:
            raise InvalidOperand(f"question weights sum to {total}")


@dataclass
class MeasurementPlan:
    """One player's response to one question: outcome operators on the
    player's sites plus a map from outcome labels to transmitted answers."""

    outcomes: Sequence[tuple[object, np.ndarray]]
    sites: tuple[int, ...]
    answer_map: Callable[[object], object] | None = None
    projective: bool = True

    def answer(self, label: object) -> object:
        return label if self.answer_map is None else self.answer_map(label)


def plan_from_measurement(
    meas: ProjMeasurement,
    sites: Sequence[int],
    answer_map: Callable[[object], object] | None = None,
) -> MeasurementPlan:
    # the outcome list is shared, not copied: plans built from one cached
    # measurement then share applied-state caches keyed on its identity
    return MeasurementPlan(meas.outcomes, tuple(sites), answer_map, True)


class Strategy:
    """Shared state + site partition + per-player question resolvers.

    resolver(player, question) must return a MeasurementPlan acting only on
    that player's sites; plans are cached per (player, question).
    """

    def __init__(
        self,
        state: StateVec,
        partition: Sequence[Sequence[int]],
        resolver: Callable[[int, tuple], MeasurementPlan],
    ):
        sets = [frozenset(p) for p in partition]
        claimed: set[int] = set()
        for s in sets:
            if claimed & s:
                raise InvalidOperand("site partition overlaps")
            claimed |= s
        if any(not 0 <= i < state.num_sites for i in claimed):
            raise InvalidOperand("partition names sites outside the state")
        self.state = state
        self.partition = tuple(tuple(sorted(p)) for p in partition)
        self._resolver = resolver
        self._plans: dict[tuple[int, tuple], MeasurementPlan] = {}

    @property
    def num_players(self) -> int:
        return len(self.partition)

    def plan(self, player: int, question: tuple) -> MeasurementPlan:
        key = (player, question)
        plan = self._plans.get(key)
        if plan is None:
            plan = self._resolver(player, question)
            if not set(plan.sites) <= set(self.partition[player]):
                raise InvalidOperand(
                    f"plan for player {player} touches sites {plan.sites} "
                    f"outside its share {self.partition[player]}"
                )
            self._plans[key] = plan
        return plan


def deterministic_strategy(
    q: int, num_players: int, answer_fn: Callable[[int, tuple], object]
) -> Strategy:
    """Classical deterministic strategy: every question has one fixed answer."""
    dim = q**num_players
    vec = np.zeros(dim, dtype=np.complex128)
    vec[0] = 1.0
    state = StateVec(q, num_players, vec)
    eye = np.eye(q, dtype=np.complex128)

    def resolver(player: int, question: tuple) -> MeasurementPlan:
        return MeasurementPlan(((answer_fn(player, question), eye),), (player,), None)

    return Strategy(state, [(j,) for j in range(num_players)], resolver)


def _rotation(q: int, theta: float) -> np.ndarray:
    """Real rotation by theta in the |0>,|1> plane, identity elsewhere."""
    u = np.eye(q, dtype=np.complex128)
    u[0, 0] = u[1, 1] = math.cos(theta)
    u[0, 1] = -math.sin(theta)
    u[1, 0] = math.sin(theta)
    return u


class PerturbedStrategy(Strategy):
    """Base strategy with the first player's X-basis measurements rotated.

    Before measuring any ("plane"/"point"/"pair", "X", ...) question, player 0
    applies a rotation by theta in the |0>,|1> plane to each of the plan's
    sites.  theta=0 reproduces the base strategy exactly.  Only one player is
    touched: identical real rotations on both shares of an EPR state cancel.
    """

    def __init__(self, base: Strategy, theta: float):
        self._base = base
        self.theta = float(theta)
        self.state = base.state
        self.partition = base.partition
        self._plans = {}

    def plan(self, player: int, question: tuple) -> MeasurementPlan:
        key = (player, question)
        cached = self._plans.get(key)
        if cached is not None:
            return cached
        plan = self._base.plan(player, question)
        if (
            self.theta != 0.0
            and player == 0
            and question[0] in ("plane", "point", "pair")
            and question[1] == "X"
        ):
            u1 = _rotation(self.state.q, self.theta)
            u = np.array([[1.0]], dtype=np.complex128)
            for _ in plan.sites:
                u = np.kron(u, u1)
            rotated = tuple(
                (label, u.conj().T @ mat @ u) for label, mat in plan.outcomes
            )
            plan = MeasurementPlan(rotated, plan.sites, plan.answer_map, plan.projective)
        self._plans[key] = plan
        return plan


# -- acceptance values --


@dataclass
class BranchStat:
    weight: float
    value: float


@dataclass
class AcceptanceReport:
    mode: str
    value: float
    stderr: float
    trials: int
    seed: int | None
    branches: dict[str, BranchStat] = dataclass_field(default_factory=dict)


def _joint_distribution(
    state: StateVec, plans: Sequence[MeasurementPlan], applied_cache: dict
) -> list[tuple[tuple, float]]:
    """Joint outcome distribution for commuting plans on disjoint sites."""
    if len(plans) == 2:
        vecs = []
        for j, plan in enumerate(plans):
            key = (j, id(plan.outcomes), plan.sites)
            got = applied_cache.get(key)
            if got is None:
                got = [
                    (label, apply_to_sites(state, mat, plan.sites))
                    for label, mat in plan.outcomes
                ]
                applied_cache[key] = got
            vecs.append(got)
        out = []
        for la, va in vecs[0]:
            if np.vdot(va, va).real < 1e-20:
                continue
            for lb, vb in vecs[1]:
                p = max(float(np.vdot(va, vb).real), 0.0)
                if p > 1e-14:
                    out.append(((la, lb), p))
        return out
    # general player count: apply the (hermitian, mutually commuting)
    # outcome operators in sequence and take an overlap with the state
    results: list[tuple[tuple, float]] = []

    def descend(j: int, vec: np.ndarray, labels: tuple):
        if j == len(plans):
            p = float(np.vdot(state.vec, vec).real)
            if p > 1e-14:
                results.append((labels, p))
            return
        for label, mat in plans[j].outcomes:
            nxt = apply_raw(vec, state.q, state.num_sites, mat, plans[j].sites)
            # outcome operators have norm at most 1, so a numerically zero
            # partial product cannot recover a visible probability later
            if np.vdot(nxt, nxt).real < 1e-20:
                continue
            descend(j + 1, nxt, labels + (label,))

    descend(0, state.vec, ())
    return results


def exact_value(game: Game, strategy: Strategy, budget: int = DEFAULT_BUDGET) -> AcceptanceReport:
    """Exact acceptance probability: sum over questions and joint outcomes.

    Raises BudgetExceeded before any heavy work if the total number of joint
    outcomes across all questions would pass the budget.
    """
    if strategy.num_players != game.num_players:
        raise InvalidOperand("strategy and game disagree on the player count")
    plans_per_q = []
    cost = 0
    for qtuple, _, _ in game.questions:
        plans = [strategy.plan(j, qj) for j, qj in enumerate(qtuple)]
        prod = 1
        for p in plans:
            prod *= len(p.outcomes)
        cost += prod
        if cost > budget:
            raise BudgetExceeded(f"joint outcome count passed {budget}")
        plans_per_q.append(plans)
    value = 0.0
    bweight: dict[str, float] = {}
    bvalue: dict[str, float] = {}
    applied_cache: dict = {}
    answer_tables: dict[int, dict] = {}
    for (qtuple, weight, branch), plans in zip(game.questions, plans_per_q):
        tables = []
        for plan in plans:
            tab = answer_tables.setdefault(id(plan), {})
            for lab, _ in plan.outcomes:
                if lab not in tab:
                    tab[lab] = plan.answer(lab)
            tables.append(tab)
        acc = 0.0
        for labels, p in _joint_distribution(strategy.state, plans, applied_cache):
            answers = tuple(tab[lab] for tab, lab in zip(tables, labels))
            v = game.predicate(qtuple, answers)
            if v:
                acc += p * v
        value += weight * acc
        bweight[branch] = bweight.get(branch, 0.0) + weight
        bvalue[branch] = bvalue.get(branch, 0.0) + weight * acc
    branches = {
        tag: BranchStat(w, bvalue[tag] / w if w > 0 else 0.0) for tag, w in bweight.items()
    }
    return AcceptanceReport("exact", value, 0.0, 0, None, branches)


def mc_value(game: Game, strategy: Strategy, trials: int, seed: int) -> AcceptanceReport:
    """Monte Carlo acceptance estimate; bit-identical for a fixed seed."""
    if trials <= 0:
        raise InvalidOperand("trials must be positive")
    if strategy.num_players != game.num_players:
        raise InvalidOperand("strategy and game disagree on the player count")
    rng = np.random.default_rng(seed)
    weights = np.array([w for _, w, _ in game.questions])
    weights = weights / weights.sum()
    hits = 0
    bseen: dict[str, int] = {}
    bhit: dict[str, int] = {}
    for _ in range(trials):
        qi = int(rng.choice(len(game.questions), p=weights))
        qtuple, _, branch = game.questions[qi]
        vec = strategy.state.vec
        answers = []
        for j, qj in enumerate(qtuple):
            plan = strategy.plan(j, qj)
            if not plan.projective:
                raise InvalidOperand("Monte Carlo sampling needs projective plans")
            posts = []
            probs = []
            for _, mat in plan.outcomes:
                post = apply_raw(
                    vec, strategy.state.q, strategy.state.num_sites, mat, plan.sites
                )
                posts.append(post)
                probs.append(max(float(np.vdot(vec, post).real), 0.0))
            total = sum(probs)
            pick = int(rng.choice(len(posts), p=np.array(probs) / total))
            vec = posts[pick] / math.sqrt(probs[pick])
            answers.append(plan.answer(plan.outcomes[pick][0]))
        v = game.predicate(qtuple, tuple(answers))
        ok = v >= 1.0 or (v > 0.0 and rng.random() < v)
        hits += ok
        bseen[branch] = bseen.get(branch, 0) + 1
        bhit[branch] = bhit.get(branch, 0) + ok
    value = hits / trials
    stderr = math.sqrt(max(value * (1.0 - value), 0.0) / trials)
    branches = {
        tag: BranchStat(n / trials, bhit[tag] / n) for tag, n in bseen.items()
    }
    return AcceptanceReport("monte-carlo", value, stderr, trials, seed, branches)


# -- the commutation game --


def com_game(s: int) -> Game:
    """Consistency game for a pair of jointly measurable observables.

    One player gets 1 or 2 and answers a digit in Z_s; the other gets 3 and
    answers a pair; accept iff the digit matches the named half of the pair.
    """
    if s < 2:
        raise InvalidOperand("need at least two outcome values")

    def predicate(questions: tuple, answers: tuple) -> float:
        single = 0 if questions[0] in (1, 2) else 1
        q = questions[single]
        a, pair = answers[single], answers[1 - single]
        if not (isinstance(a, int) and 0 <= a < s):
            return 0.0
        if not (
            isinstance(pair, tuple)
            and len(pair) == 2
            and all(isinstance(b, int) and 0 <= b < s for b in pair)
        ):
            return 0.0
        return 1.0 if pair[q - 1] == a else 0.0

    entries = tuple(
        (qt, 0.25, "com") for qt in [(1, 3), (2, 3), (3, 1), (3, 2)]
    )
    return Game(2, entries, predicate)


# -- the square game --

SQUARE_X_CELL = (1, 0)
SQUARE_Z_CELL = (0, 1)

# cell -> (first factor, second factor, sign); rows multiply to +1, columns to -1
_SQUARE_TABLE: dict[tuple[int, int], tuple[str, str, int]] = {
    (0, 0): ("I", "Z", 1),
    (0, 1): ("Z", "I", 1),
    (0, 2): ("Z", "Z", 1),
    (1, 0): ("X", "I", 1),
    (1, 1): ("I", "X", 1),
    (1, 2): ("X", "X", 1),
    (2, 0): ("X", "Z", -1),
    (2, 1): ("Z", "X", -1),
    (2, 2): ("Y", "Y", 1),
}


def square_context_cells(kind: str, idx: int) -> tuple[tuple[int, int], ...]:
    if kind == "row":
        return tuple((idx, j) for j in range(3))
    if kind == "col":
        return tuple((i, idx) for i in range(3))
    raise InvalidOperand(f"unknown context kind {kind!r}")


def square_decode(kind: str, idx: int, answer: object) -> dict[tuple[int, int], int] | None:
    """Cell values encoded by a context answer; None if malformed.

    The answer carries the first two cells; the third is fixed by the parity
    (rows even, columns odd)."""
    if not (
        isinstance(answer, tuple)
        and len(answer) == 2
        and all(b in (0, 1) for b in answer)
    ):
        return None
    cells = square_context_cells(kind, idx)
    parity = 0 if kind == "row" else 1
    b1, b2 = answer
    return {cells[0]: b1, cells[1]: b2, cells[2]: parity ^ b1 ^ b2}


def magic_square_game() -> Game:
    """3x3 parity square game with single-cell probe questions.

    Three quarters of the weight is the usual row-versus-column round; the
    rest pairs a context with one of the two labeled cells (SQUARE_X_CELL,
    SQUARE_Z_CELL), whose one-bit answers are what the composed protocol
    replaces with point queries.
    """

    def predicate(questions: tuple, answers: tuple) -> float:
        decoded = []
        for q, a in zip(questions, answers):
            if q[0] in ("msrow", "mscol"):
                kind = "row" if q[0] == "msrow" else "col"
                table = square_decode(kind, q[1], a)
                if table is None:
                    return 0.0
                decoded.append(table)
            else:
                if a not in (0, 1):
                    return 0.0
                decoded.append({(q[1], q[2]): a})
        shared = set(decoded[0]) & set(decoded[1])
        if len(shared) != 1:
            raise InvalidOperand(f"questions {questions!r} share {len(shared)} cells")
        cell = shared.pop()
        return 1.0 if decoded[0][cell] == decoded[1][cell] else 0.0

    entries = []
    for i in range(3):
        for j in range(3):
            w = 0.75 / 18
            entries.append(((("msrow", i), ("mscol", j)), w, "grid"))
            entries.append(((("mscol", j), ("msrow", i)), w, "grid"))
    for cell in (SQUARE_X_CELL, SQUARE_Z_CELL):
        cellq = ("mscell", cell[0], cell[1])
        for ctx in (("msrow", cell[0]), ("mscol", cell[1])):
            w = 0.25 / 8
            entries.append(((ctx, cellq), w, "probe"))
            entries.append(((cellq, ctx), w, "probe"))
    return Game(2, tuple(entries), predicate)


def _square_cell_mats(
    xhat: np.ndarray, zhat: np.ndarray, anc_x: np.ndarray, anc_z: np.ndarray
) -> dict[tuple[int, int], np.ndarray]:
    """Dense cell observables: first factor built from xhat/zhat, second from
    the ancilla pair, combined per the parity table."""
    d1 = xhat.shape[0]
    d2 = anc_x.shape[0]
    first = {
        "I": np.eye(d1, dtype=np.complex128),
        "X": xhat,
        "Z": zhat,
        "Y": 1j * (xhat @ zhat),
    }
    second = {
        "I": np.eye(d2, dtype=np.complex128),
        "X": anc_x,
        "Z": anc_z,
        "Y": 1j * (anc_x @ anc_z),
    }
    return {
        cell: sign * np.kron(first[f], second[g])
        for cell, (f, g, sign) in _SQUARE_TABLE.items()
    }


def _bit_measurement(q: int, num_sites: int, mat: np.ndarray) -> ProjMeasurement:
    obs = GenObservable(DenseOp(mat), 2)
    return ProjMeasurement(q, num_sites, [(e, p) for e, p in enumerate(obs.projectors)])


def _context_measurement(
    q: int, num_sites: int, m1: np.ndarray, m2: np.ndarray
) -> ProjMeasurement:
    p1 = GenObservable(DenseOp(m1), 2).projectors
    p2 = GenObservable(DenseOp(m2), 2).projectors
    outcomes = [
        ((b1, b2), p1[b1] @ p2[b2]) for b1 in range(2) for b2 in range(2)
    ]
    return ProjMeasurement(q, num_sites, outcomes)


def honest_magic_square_strategy() -> Strategy:
    """Perfect strategy for magic_square_game on two shared EPR qubit pairs."""
    spec = field(2, 1)
    state = epr_state(spec, 2)
    x1 = tau(spec, "X", spec.one).mat
    z1 = tau(spec, "Z", spec.one).mat
    cells = _square_cell_mats(x1, z1, x1, z1)

    def resolver(player: int, question: tuple) -> MeasurementPlan:
        sites = (0, 1) if player == 0 else (2, 3)
        if question[0] == "mscell":
            meas = _bit_measurement(2, 2, cells[(question[1], question[2])])
            return plan_from_measurement(meas, sites)
        kind = "row" if question[0] == "msrow" else "col"
        ctx = square_context_cells(kind, question[1])
        meas = _context_measurement(2, 2, cells[ctx[0]], cells[ctx[1]])
        return plan_from_measurement(meas, sites)

    return Strategy(state, [(0, 1), (2, 3)], resolver)


# -- classical low-degree tests --


def coeff_exponents(d: int) -> tuple[tuple[int, int], ...]:
    """Canonical ordering of bivariate exponents with total degree <= d."""
    if d < 0:
        raise InvalidOperand("degree bound must be nonnegative")
    return tuple(sorted((e0, e1) for e0 in range(d + 1) for e1 in range(d + 1 - e0)))


def plane_answer_string(r: MultiPoly, d: int) -> tuple[FieldElement, ...]:
    """Coefficient description of a plane answer, zeros included."""
    if r.num_vars != 2 or r.total_degree() > d:
        raise InvalidOperand("not a plane answer within the degree bound")
    return tuple(r.coeffs.get(e, r.spec.zero) for e in coeff_exponents(d))


def inner_injection(spec: FieldSpec, d: int) -> CoordInjection:
    """Multilinear injection for coefficient strings of plane answers."""
    n_desc = len(coeff_exponents(d))
    m_inner = max(1, math.ceil(math.log2(n_desc)))
    return CoordInjection(spec, n_desc, 2, m_inner)


def encode_plane_answer(
    r: MultiPoly, d: int, inner: CoordInjection, t: AffineSubspace
) -> MultiPoly | FieldElement:
    """Restriction to t of the multilinear encoding of r's description."""
    g = inner.encode(plane_answer_string(r, d))
    if t.dim == 0:
        return g.eval(t.base)
    return restrict_to_subspace(g, t)


def _valid_plane_answer(spec: FieldSpec, d: int, ans: object) -> bool:
    return (
        isinstance(ans, MultiPoly)
        and ans.spec == spec
        and ans.num_vars == 2
        and ans.total_degree() <= d
    )


def _valid_value_answer(spec: FieldSpec, ans: object) -> bool:
    return isinstance(ans, FieldElement) and ans.spec == spec


def _negate_answer(ans: object) -> object:
    return -ans


def _restriction_entries_level1(
    spec: FieldSpec, m: int, prefix_weight: float, wtag: object, branch: str
) -> list[tuple[tuple, float, str]]:
    planes = enumerate_planes(spec, m)
    entries = []
    per = prefix_weight / (len(planes) * spec.q**2 * 2)
    for s in planes:
        sq = ("plane", wtag, s)
        for w in s.points():
            pq = ("point", wtag, w)
            entries.append(((sq, pq), per, branch))
            entries.append(((pq, sq), per, branch))
    return entries


def _check_level1(
    spec: FieldSpec, d: int, questions: tuple, answers: tuple, negate_second: bool
) -> float:
    """Plane/point restriction check, with the second answer optionally negated."""
    a0, a1 = answers
    if negate_second:
        try:
            a1 = _negate_answer(a1)
        except TypeError:
            return 0.0
    by_kind = {}
    for q, a in zip(questions, (a0, a1)):
        by_kind[q[0]] = (q, a)
    (sq, r), (pq, val) = by_kind["plane"], by_kind["point"]
    if not _valid_plane_answer(spec, d, r) or not _valid_value_answer(spec, val):
        return 0.0
    params = sq[2].locate(pq[2])
    if params is None:
        raise InvalidOperand("point query does not lie on the plane")
    return 1.0 if r.eval(params) == val else 0.0


def _restriction_entries_level2(
    spec: FieldSpec,
    m: int,
    d: int,
    prefix_weight: float,
    wtag: object,
    branch: str,
    budget: int = 200_000,
) -> list[tuple[tuple, float, str]]:
    inner = inner_injection(spec, d)
    count = (
        num_affine_planes(spec, m) * num_affine_planes(spec, inner.m) * spec.q**2 * 2
        + spec.q**m
    )
    if count > budget:
        raise BudgetExceeded(f"{count} composed questions exceed {budget}")
    planes = enumerate_planes(spec, m)
    inner_planes = enumerate_planes(spec, inner.m)
    entries = []
    per = (prefix_weight / 2) / (len(planes) * len(inner_planes) * spec.q**2 * 2)
    for s in planes:
        for t in inner_planes:
            pairq = ("pair", wtag, s, t)
            for y in t.points():
                ptq = ("pair", wtag, s, point_subspace(y))
                entries.append(((pairq, ptq), per, branch))
                entries.append(((ptq, pairq), per, branch))
    per_pt = (prefix_weight / 2) / spec.q**m
    for w in enumerate_points(spec, m):
        pq = ("point", wtag, w)
        entries.append(((pq, pq), per_pt, branch))
    return entries


def _check_level2(
    spec: FieldSpec, d: int, questions: tuple, answers: tuple, negate_second: bool
) -> float:
    a0, a1 = answers
    if negate_second:
        try:
            a1 = _negate_answer(a1)
        except TypeError:
            return 0.0
    answers = (a0, a1)
    if questions[0][0] == "point":
        if not all(_valid_value_answer(spec, a) for a in answers):
            return 0.0
        return 1.0 if answers[0] == answers[1] else 0.0
    inner_bound = inner_injection(spec, d).m
    plane_side = 0 if questions[0][3].dim == 2 else 1
    rq, r = questions[plane_side], answers[plane_side]
    vq, val = questions[1 - plane_side], answers[1 - plane_side]
    if not _valid_plane_answer(spec, inner_bound, r) or not _valid_value_answer(spec, val):
        return 0.0
    params = rq[3].locate(vq[3].base)
    if params is None:
        raise InvalidOperand("inner point does not lie on the inner plane")
    return 1.0 if r.eval(params) == val else 0.0


def clowdeg_game(spec: FieldSpec, m: int, d: int, level: int = 1) -> Game:
    """Classical low-degree test over GF(q)^m with degree bound d.

    Level 1 pairs a plane with a point on it and checks the restriction;
    level 2 asks for restrictions of the encoded coefficient description and
    checks them at description-domain points, plus plain point consistency.
    """
    if m < 2:
        raise InvalidOperand("need at least two variables")
    if level == 1:
        entries = _restriction_entries_level1(spec, m, 1.0, None, "ld")

        def predicate(questions: tuple, answers: tuple) -> float:
            return _check_level1(spec, d, questions, answers, False)

    elif level == 2:
        entries = _restriction_entries_level2(spec, m, d, 1.0, None, "ld2")

        def predicate(questions: tuple, answers: tuple) -> float:
            return _check_level2(spec, d, questions, answers, False)

    else:
        raise InvalidOperand(f"unknown level {level}")
    return Game(2, tuple(entries), predicate)


# -- the two-prover protocol --


def qlowdeg_game(spec: FieldSpec, inj: CoordInjection, d: int, level: int = 1) -> Game:
    """Entangled-prover low-degree protocol over GF(2^t).

    Half the weight runs the classical restriction test in a uniformly random
    basis W, negating the second prover's answer when W = X.  The other half
    draws points x, z and scalings u, u'; when the paired observables commute
    it runs the commutation game on them, otherwise the square game with the
    two labeled cells replaced by the point queries, whose answers enter the
    square as tr(u.b) and a^-1 tr(u'.b).
    """
    if spec.p != 2:
        raise UnsupportedPrime("the protocol layer is built for characteristic 2")
    if inj.spec != spec:
        raise InvalidOperand("injection is over a different field")
    m = inj.m
    entries: list[tuple[tuple, float, str]] = []
    for wtag in ("X", "Z"):
        if level == 1:
            entries += _restriction_entries_level1(spec, m, 0.25, wtag, "a")
        elif level == 2:
            entries += _restriction_entries_level2(spec, m, d, 0.25, wtag, "a")
        else:
            raise InvalidOperand(f"unknown level {level}")

    points = enumerate_points(spec, m)
    combo_w = 0.5 / (len(points) ** 2 * spec.q**2)
    expand = {x: inj.coord_expand(x) for x in points}
    for x in points:
        for z in points:
            for u in spec.elements():
                for up in spec.elements():
                    a = tr_dot(vec_scale(u, expand[x]), vec_scale(up, expand[z]))
                    xq = ("point", "X", x)
                    zq = ("point", "Z", z)
                    if a == 0:
                        cq = ("com3", x, z, u, up)
                        for pair in [(xq, cq), (zq, cq), (cq, xq), (cq, zq)]:
                            entries.append((pair, combo_w / 4, "b-com"))
                    else:
                        for i in range(3):
                            for j in range(3):
                                w = combo_w * 0.75 / 18
                                rq = ("msctx", "row", i, x, z, u, up)
                                cjq = ("msctx", "col", j, x, z, u, up)
                                entries.append(((rq, cjq), w, "b-ms"))
                                entries.append(((cjq, rq), w, "b-ms"))
                        for cell, ptq in [(SQUARE_X_CELL, xq), (SQUARE_Z_CELL, zq)]:
                            for ctx in [
                                ("msctx", "row", cell[0], x, z, u, up),
                                ("msctx", "col", cell[1], x, z, u, up),
                            ]:
                                w = combo_w * 0.25 / 8
                                entries.append(((ctx, ptq), w, "b-ms"))
                                entries.append(((ptq, ctx), w, "b-ms"))

    def mapped_bit(qtag: str, raw: object, u, up, ainv: int | None) -> int | None:
        """Verifier-side digit for a replaced point answer; None rejects.

        X answers map to tr(u.b), Z answers to tr(u'.b), additionally scaled
        by the inverse commutation phase digit in the square branch."""
        if not _valid_value_answer(spec, raw):
            return None
        if qtag == "X":
            return (u * raw).trace()
        bit = (up * raw).trace()
        if ainv is not None:
            bit = bit * ainv % spec.p
        return bit

    def predicate(questions: tuple, answers: tuple) -> float:
        kinds = tuple(q[0] for q in questions)
        if "com3" in kinds:
            ci = kinds.index("com3")
            u, up = questions[ci][3], questions[ci][4]
            pair = answers[ci]
            if not (
                isinstance(pair, tuple)
                and len(pair) == 2
                and all(b in range(spec.p) for b in pair)
            ):
                return 0.0
            ptq = questions[1 - ci]
            bit = mapped_bit(ptq[1], answers[1 - ci], u, up, None)
            if bit is None:
                return 0.0
            return 1.0 if bit == pair[0 if ptq[1] == "X" else 1] else 0.0
        if "msctx" in kinds:
            _, _, _, x, z, u, up = questions[kinds.index("msctx")]
            a = tr_dot(vec_scale(u, expand[x]), vec_scale(up, expand[z]))
            decoded = []
            for q, ans in zip(questions, answers):
                if q[0] == "msctx":
                    table = square_decode(q[1], q[2], ans)
                    if table is None:
                        return 0.0
                    decoded.append(table)
                else:
                    cell = SQUARE_X_CELL if q[1] == "X" else SQUARE_Z_CELL
                    bit = mapped_bit(q[1], ans, u, up, pow(a, -1, spec.p))
                    if bit is None:
                        return 0.0
                    decoded.append({cell: bit})
            shared = set(decoded[0]) & set(decoded[1])
            if len(shared) != 1:
                raise InvalidOperand(f"questions {questions!r} share {len(shared)} cells")
            cell = shared.pop()
            return 1.0 if decoded[0][cell] == decoded[1][cell] else 0.0
        wtag = questions[0][1]
        checker = _check_level1 if level == 1 else _check_level2
        return checker(spec, d, questions, answers, wtag == "X")

    return Game(2, tuple(entries), predicate)


def honest_plan_resolver(
    spec: FieldSpec,
    inj: CoordInjection,
    d: int,
    layout: Mapping[int, tuple[tuple[int, ...], int]],
) -> Callable[[int, tuple], MeasurementPlan]:
    """Resolver for the intended measurements on arbitrary per-player shares.

    `layout` maps each player to (register sites, ancilla site).  Register
    queries act on the register sites in listed order; square contexts append
    the ancilla.  All players draw plans from one memo pool, so two players
    asked the same question share a single outcome list.
    """
    if spec.p != 2:
        raise UnsupportedPrime("the honest strategy is built for characteristic 2")
    n = inj.n
    sdb = self_dual_basis(spec)
    anc_x = tau(spec, "X", sdb.basis[0]).mat
    anc_z = tau(spec, "Z", sdb.basis[0]).mat
    inner = inner_injection(spec, d)
    meas_memo: dict[tuple[str, AffineSubspace], ProjMeasurement] = {}
    ms_memo: dict[tuple, dict[tuple[int, int], np.ndarray]] = {}
    enc_memo: dict[MultiPoly, MultiPoly] = {}

    def encoded_description(r: MultiPoly) -> MultiPoly:
        g = enc_memo.get(r)
        if g is None:
            g = inner.encode(plane_answer_string(r, d))
            enc_memo[r] = g
        return g

    def subspace_meas(wtag: str, s: AffineSubspace) -> ProjMeasurement:
        key = (wtag, s)
        if key not in meas_memo:
            meas_memo[key] = subspace_measurement(spec, wtag, s, inj)
        return meas_memo[key]

    def scaled_word(wtag: str, pt: Point, scale: FieldElement) -> np.ndarray:
        return pauli_word(spec, wtag, vec_scale(scale, inj.coord_expand(pt))).mat

    def square_cells(x: Point, z: Point, u, up) -> dict[tuple[int, int], np.ndarray]:
        key = (x, z, u, up)
        if key not in ms_memo:
            ms_memo[key] = _square_cell_mats(
                scaled_word("X", x, u), scaled_word("Z", z, up), anc_x, anc_z
            )
        return ms_memo[key]

    def resolver(player: int, question: tuple) -> MeasurementPlan:
        reg, anc = layout[player]
        tag = question[0]
        if tag == "plane":
            return plan_from_measurement(subspace_meas(question[1], question[2]), reg)
        if tag == "point":
            meas = subspace_meas(question[1], point_subspace(question[2]))
            return plan_from_measurement(meas, reg, lambda r: r.eval(()))
        if tag == "pair":
            _, wtag, s, t = question
            if t.dim == 0:
                amap = lambda r: encoded_description(r).eval(t.base)
            else:
                amap = lambda r: restrict_to_subspace(encoded_description(r), t)
            return plan_from_measurement(subspace_meas(wtag, s), reg, amap)
        if tag == "com3":
            _, x, z, u, up = question
            px = GenObservable(DenseOp(scaled_word("X", x, u)), spec.p).projectors
            pz = GenObservable(DenseOp(scaled_word("Z", z, up)), spec.p).projectors
            outcomes = [
                ((c1, c2), px[c1] @ pz[c2])
                for c1 in range(spec.p)
                for c2 in range(spec.p)
            ]
            meas = ProjMeasurement(spec.q, n, outcomes)
            return plan_from_measurement(meas, reg)
        if tag == "msctx":
            _, kind, idx, x, z, u, up = question
            cells = square_cells(x, z, u, up)
            ctx = square_context_cells(kind, idx)
            meas = _context_measurement(spec.q, n + 1, cells[ctx[0]], cells[ctx[1]])
            return plan_from_measurement(meas, reg + (anc,))
        raise InvalidOperand(f"unknown question {question!r}")

    return resolver


def honest_pauli_strategy(
    spec: FieldSpec, inj: CoordInjection, d: int | None = None
) -> Strategy:
    """The intended entangled strategy for qlowdeg_game on n+1 EPR pairs.

    Subspace and point queries measure all n register qudits in the named
    basis and return the encoding's restriction; composed queries re-encode
    the same outcome.  The commutation probe measures the two commuting
    scaled words jointly; square contexts combine the (anticommuting) scaled
    words on the register with a Pauli pair on the extra EPR pair.
    """
    n = inj.n
    if d is None:
        d = inj.degree
    state = epr_state(spec, n + 1)
    layout = {
        0: (tuple(range(n)), n),
        1: (tuple(range(n + 1, 2 * n + 1)), 2 * n + 1),
    }
    resolver = honest_plan_resolver(spec, inj, d, layout)
    partition = [reg + (anc,) for reg, anc in (layout[0], layout[1])]
    return Strategy(state, partition, resolver)


# -- strategy diagnostics --


def _plan_observable(plan: MeasurementPlan, u: FieldElement, conjugate: bool) -> np.ndarray:
    """sum over outcomes of w^tr(u.value) times the outcome operator."""
    w = root_of_unity(u.spec.p)
    dim = plan.outcomes[0][1].shape[0]
    acc = np.zeros((dim, dim), dtype=np.complex128)
    for label, mat in plan.outcomes:
        val = plan.answer(label)
        if conjugate:
            val = -val
        acc = acc + w ** ((u * val).trace()) * mat
    return acc


def diagnostics(strategy: Strategy, inj: CoordInjection) -> dict[str, float]:
    """Residuals that vanish exactly for the honest strategy.

    consistency_W: the first player's W-observable at a uniform point, scaled
    by a uniform u, against the second player's (conjugate-labeled for X);
    twisted_commutation: the scaled X and Z words' commutation phase;
    restriction: probability mass on plane/point answer pairs that the
    verifier would reject.  All are averages of squared residual norms.
    """
    spec = inj.spec
    state = strategy.state
    points = enumerate_points(spec, inj.m)
    w = root_of_unity(spec.p)
    out: dict[str, float] = {}
    for wtag in ("X", "Z"):
        total = 0.0
        for pt in points:
            q = ("point", wtag, pt)
            pa = strategy.plan(0, q)
            pb = strategy.plan(1, q)
            for u in spec.elements():
                oa = _plan_observable(pa, u, False)
                ob = _plan_observable(pb, u, wtag == "X")
                va = apply_to_sites(state, oa, pa.sites)
                vb = apply_to_sites(state, ob, pb.sites)
                total += float(np.vdot(va - vb, va - vb).real)
        out[f"consistency_{wtag}"] = total / (len(points) * spec.q)

    total = 0.0
    for x in points:
        xe = inj.coord_expand(x)
        for z in points:
            ze = inj.coord_expand(z)
            for u in spec.elements():
                for up in spec.elements():
                    px = strategy.plan(0, ("point", "X", x))
                    pz = strategy.plan(0, ("point", "Z", z))
                    ox = _plan_observable(px, u, False)
                    oz = _plan_observable(pz, up, False)
                    phase = w ** tr_dot(vec_scale(u, xe), vec_scale(up, ze))
                    dmat = ox @ oz - phase * (oz @ ox)
                    dv = apply_to_sites(state, dmat, px.sites)
                    total += float(np.vdot(dv, dv).real)
    out["twisted_commutation"] = total / (len(points) ** 2 * spec.q**2)

    total = 0.0
    count = 0
    for wtag in ("X", "Z"):
        for s in enumerate_planes(spec, inj.m):
            sp = strategy.plan(0, ("plane", wtag, s))
            for pt in s.points():
                pp = strategy.plan(1, ("point", wtag, pt))
                params = s.locate(pt)
                bad = 0.0
                for r, pmat in sp.outcomes:
                    va = apply_to_sites(state, pmat, sp.sites)
                    for lab, qmat in pp.outcomes:
                        val = pp.answer(lab)
                        if wtag == "X":
                            val = -val
                        if r.eval(params) == val:
                            continue
                        vb = apply_to_sites(state, qmat, pp.sites)
                        bad += max(float(np.vdot(va, vb).real), 0.0)
                total += bad
                count += 1
    out["restriction"] = total / count
    return out
