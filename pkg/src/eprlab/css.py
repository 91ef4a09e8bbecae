"""Weakly self-dual codes, their CSS codespaces, and the k-prover code check.

A generator matrix G over GF(q) with independent columns and G^T G = 0 spans
a code C contained in its own dual.  The same columns then define commuting
X-type and Z-type stabilizer words, a codespace of dimension q^(k - 2k'),
and (when dim C^perp exceeds dim C) logical string operators.  On top of
that sits the membership game: k provers each hold one position of every
code block, the verifier hides a uniformly random special prover t, runs a
two-prover low-degree round, broadcasts the second question to everyone but
t, and compares t's answer against a secret codeword-weighted combination
of the rest.  Neither t nor the weighting is visible to the provers, so the
game predicate folds both into the acceptance probability.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    BudgetExceeded,
    DimensionCap,
    EprLabError,
    FormatMismatch,
    InvalidOperand,
    LengthMismatch,
    NoLogicalQudit,
    NotSelfDual,
    RankDeficient,
    SpecMismatch,
)
from .games import (
    AcceptanceReport,
    BranchStat,
    Game,
    Strategy,
    honest_plan_resolver,
    qlowdeg_game,
)
from .gf import (
    FieldElement,
    FieldSpec,
    field,
    mat_rank,
    mat_rref,
    mat_nullspace,
    mat_solve,
    span_iter,
    vec_dot,
)
from .qsim import MAX_AMPLITUDES, StateVec, apply_raw, pauli_word
from .rmpoly import CoordInjection, MultiPoly

DEFAULT_CHECK_BUDGET = 6_000_000

Word = tuple[FieldElement, ...]


# -- linear codes --


@dataclass(frozen=True)
class LinearCode:
    """colspan(G) for a k x k' generator with independent, self-orthogonal
    columns; `dual` is a basis of C^perp = ker(G^T)."""

    spec: FieldSpec
    rows: tuple[Word, ...]
    dual: tuple[Word, ...]

    @property
    def k(self) -> int:
        return len(self.rows)

    @property
    def k_prime(self) -> int:
        return len(self.rows[0])

    def column(self, j: int) -> Word:
        if not 0 <= j < self.k_prime:
            raise InvalidOperand(f"column {j} outside [0, {self.k_prime})")
        return tuple(r[j] for r in self.rows)

    def columns(self) -> tuple[Word, ...]:
        return tuple(self.column(j) for j in range(self.k_prime))

    def codewords(self) -> tuple[Word, ...]:
        return tuple(span_iter(self.columns()))

    def contains(self, word: Sequence[FieldElement]) -> bool:
        if len(word) != self.k:
            raise LengthMismatch(f"word length {len(word)}, code length {self.k}")
        return mat_solve(self.rows, list(word)) is not None

    def dual_contains(self, word: Sequence[FieldElement]) -> bool:
        if len(word) != self.k:
            raise LengthMismatch(f"word length {len(word)}, code length {self.k}")
        return all(not vec_dot(col, word) for col in self.columns())


def validate_code(spec: FieldSpec, rows: Sequence[Sequence[FieldElement | int]]) -> LinearCode:
    """Check rank and weak self-duality, returning the code with its dual basis.

    Integer entries are lifted through the prime subfield.  Raises
    RankDeficient when the columns are dependent and NotSelfDual when some
    pair of columns has a nonzero dot product.
    """
    if not rows or not rows[0]:
        raise InvalidOperand("generator matrix must be nonempty")
    width = len(rows[0])
    lifted: list[Word] = []
    for r in rows:
        if len(r) != width:
            raise InvalidOperand("generator rows have unequal lengths")
        out = []
        for x in r:
            if isinstance(x, int):
                x = spec.lift(x)
            elif x.spec != spec:
                raise SpecMismatch(f"{x.spec} entry in a {spec} generator")
            out.append(x)
        lifted.append(tuple(out))
    code = LinearCode(spec, tuple(lifted), ())
    cols = code.columns()
    if mat_rank(cols) != width:
        raise RankDeficient(f"columns span only {mat_rank(cols)} of {width} dimensions")
    for j1 in range(width):
        for j2 in range(j1, width):
            if vec_dot(cols[j1], cols[j2]):
                raise NotSelfDual(f"columns {j1} and {j2} are not orthogonal")
    dual = tuple(mat_nullspace(cols))
    return LinearCode(spec, tuple(lifted), dual)


def epr_code(spec: FieldSpec) -> LinearCode:
    """The length-2 repetition-style code with generator column (1, s), s^2 = -1.

    At p = 2 this is (1, 1); over fields with q = 1 mod 4 a square root of -1
    exists and serves as s.  Raises NotSelfDual when the field has none.
    """
    minus_one = -spec.one
    for c in range(spec.q):
        s = spec.el(c)
        if s * s == minus_one:
            return validate_code(spec, [[spec.one], [s]])
    raise NotSelfDual(f"no square root of -1 in GF({spec.q})")


_HAMMING_CHECKS = ("0001111", "0110011", "1010101")


def steane_code(spec: FieldSpec) -> LinearCode:
    """The [7, 3] code spanned by the Hamming parity checks, over GF(2^t)."""
    if spec.p != 2:
        raise NotSelfDual("the Hamming checks are self-orthogonal only in characteristic 2")
    rows = [[int(h[i]) for h in _HAMMING_CHECKS] for i in range(7)]
    return validate_code(spec, rows)


# -- text serialization --
#
# Line 1: "p t k k'".  Then k rows; each row has k' whitespace-separated
# entries, each entry t digits (power-basis coefficients, low power first).


def dump_code(code: LinearCode) -> str:
    spec = code.spec
    lines = [f"{spec.p} {spec.t} {code.k} {code.k_prime}"]
    for r in code.rows:
        lines.append(" ".join("".join(str(d) for d in x.digits) for x in r))
    return "\n".join(lines) + "\n"


def load_code(text: str) -> LinearCode:
    """Parse dump_code's format and re-validate.  Raises FormatMismatch."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatMismatch("empty code description")
    head = lines[0].split()
    if len(head) != 4 or not all(tok.isdigit() for tok in head):
        raise FormatMismatch(f"bad header {lines[0]!r}")
    p, t, k, kp = (int(tok) for tok in head)
    if len(lines) != 1 + k:
        raise FormatMismatch(f"expected {k} generator rows, found {len(lines) - 1}")
    try:
        spec = field(p, t)
    except EprLabError as e:
        raise FormatMismatch(f"bad field parameters p={p}, t={t}") from e
    rows = []
    for ln in lines[1:]:
        toks = ln.split()
        if len(toks) != kp:
            raise FormatMismatch(f"row {ln!r} has {len(toks)} entries, expected {kp}")
        row = []
        for tok in toks:
            if len(tok) != t or not tok.isdigit() or any(int(c) >= p for c in tok):
                raise FormatMismatch(f"bad field element {tok!r}")
            row.append(spec.from_digits([int(c) for c in tok]))
        rows.append(row)
    return validate_code(spec, rows)


# -- the CSS codespace --


@dataclass(frozen=True)
class CssCode:
    """Stabilizer data of a validated code: the codespace projector on k
    qudits plus one logical X/Z word pair when the code has a logical qudit."""

    code: LinearCode
    projector: np.ndarray
    logical_x: Word | None
    logical_z: Word | None

    @property
    def spec(self) -> FieldSpec:
        return self.code.spec

    @property
    def k(self) -> int:
        return self.code.k

    @property
    def num_logical(self) -> int:
        return self.code.k - 2 * self.code.k_prime

    def stabilizer_word(self, j: int) -> Word:
        return self.code.column(j)

    def stabilizer_op(self, wtag: str, j: int, c: FieldElement | None = None):
        """tau_W(c . column_j) as a dense operator on the k qudits."""
        if c is None:
            c = self.spec.one
        return pauli_word(self.spec, wtag, tuple(c * x for x in self.stabilizer_word(j)))


def _first_logical_pair(code: LinearCode) -> tuple[Word, Word]:
    """Deterministic logical words: earliest dual-span elements outside C,
    with the second scaled so the pairing x.z equals one."""
    xbar = None
    for w in span_iter(mat_rref(code.dual)):
        if any(w) and not code.contains(w):
            xbar = w
            break
    assert xbar is not None, "validated code with a logical qudit has dual strictly above C"
    for w in span_iter(mat_rref(code.dual)):
        if not any(w) or code.contains(w):
            continue
        pairing = vec_dot(xbar, w)
        if pairing:
            return xbar, tuple(pairing.inverse() * x for x in w)
    raise AssertionError("no dual word pairs with the logical X word")


def css_from_code(code: LinearCode) -> CssCode:
    """Build the codespace projector by averaging every stabilizer word.

    The projector is the product over bases W and generator columns j of the
    uniform average of tau_W(c . column_j) over c in GF(q); commuting factors
    make the order irrelevant.  Construction re-checks idempotence and the
    q^(k - 2k') rank before returning.
    """
    spec = code.spec
    dim = spec.q**code.k
    if dim * dim > MAX_AMPLITUDES:
        raise DimensionCap(f"a dense {dim} x {dim} projector passes the size cap")
    proj = np.eye(dim, dtype=np.complex128)
    for wtag in ("X", "Z"):
        for j in range(code.k_prime):
            word = code.column(j)
            avg = np.zeros((dim, dim), dtype=np.complex128)
            for c in spec.elements():
                avg += pauli_word(spec, wtag, tuple(c * x for x in word)).mat
            proj = proj @ (avg / spec.q)
    if np.max(np.abs(proj @ proj - proj)) > 1e-10:
        raise InvalidOperand("stabilizer averaging did not produce a projector")
    rank = float(np.trace(proj).real)
    expected = spec.q ** (code.k - 2 * code.k_prime)
    if abs(rank - expected) > 1e-8:
        raise InvalidOperand(f"codespace rank {rank:.3f}, expected {expected}")
    if code.k - 2 * code.k_prime >= 1:
        xbar, zbar = _first_logical_pair(code)
    else:
        xbar, zbar = None, None
    return CssCode(code, proj, xbar, zbar)


def logical_ops(css: CssCode) -> tuple[Word, Word]:
    """The stored logical X and Z words; raises NoLogicalQudit when dim
    C^perp = dim C."""
    if css.logical_x is None or css.logical_z is None:
        raise NoLogicalQudit(f"[{css.k}, {css.code.k_prime}] code encodes nothing")
    return css.logical_x, css.logical_z


def logical_zero(css: CssCode) -> StateVec:
    """Uniform superposition of the codewords of C, one block of k qudits.

    For a code with no logical qudit this is the unique codespace state; with
    one, it is the +1 eigenvector of the logical Z word.
    """
    spec = css.spec
    q = spec.q
    vec = np.zeros(q**css.k, dtype=np.complex128)
    for word in css.code.codewords():
        idx = 0
        for x in word:
            idx = idx * q + x.code
        vec[idx] = 1.0
    return StateVec(q, css.k, vec / np.linalg.norm(vec))


def codespace_basis(css: CssCode) -> list[StateVec]:
    """Orthonormal basis |a> = tau_X(a . xbar) |0> of the first logical qudit.

    The zero state is fixed by every Z-type dual word, so shifting along the
    stored X word moves only the first logical qudit; any further logical
    qudits stay at zero throughout.
    """
    zero = logical_zero(css)
    if css.num_logical == 0:
        return [zero]
    spec = css.spec
    out = []
    for a in spec.elements():
        shifted = pauli_word(spec, "X", tuple(a * x for x in css.logical_x)).mat @ zero.vec
        out.append(StateVec(spec.q, css.k, shifted))
    return out


def encode_state(css: CssCode, state: StateVec) -> StateVec:
    """Apply the block isometry |a> -> |a-bar> to every logical qudit.

    Site layout of the image: logical qudit i becomes qudits i*k .. i*k+k-1.
    """
    if css.num_logical == 0:
        raise NoLogicalQudit("the code has no logical qudit to encode into")
    spec = css.spec
    q = spec.q
    if state.q != q:
        raise InvalidOperand(f"state is over dimension {state.q}, code over {q}")
    n = state.num_sites
    if q ** (n * css.k) > MAX_AMPLITUDES:
        raise DimensionCap(f"{n} blocks of {css.k} qudits exceed the dense cap")
    isom = np.stack([b.vec for b in codespace_basis(css)], axis=1)
    arr = state.vec.reshape((q,) * n)
    for i in range(n):
        arr = np.moveaxis(np.tensordot(isom, arr, axes=(1, i)), 0, i)
    return StateVec(q, n * css.k, arr.reshape(-1))


# -- composite routing --


@dataclass(frozen=True)
class CompositeRouting:
    """Hidden verifier draw: the special prover and the codeword weighting
    v with v[special] = 1 used to combine the other answers."""

    special: int
    weights: Word


def all_routings(code: LinearCode, t: int) -> tuple[CompositeRouting, ...]:
    """Every routing for special prover t: {v in C : v_t = 1}, q^(k'-1) many."""
    if not 0 <= t < code.k:
        raise InvalidOperand(f"prover index {t} outside [0, {code.k})")
    out = [
        CompositeRouting(t, v)
        for v in span_iter(code.columns())
        if v[t] == code.spec.one
    ]
    if not out:
        raise InvalidOperand(f"generator row {t} is zero; no codeword singles out prover {t}")
    return tuple(out)


def sample_routing(code: LinearCode, t: int, rng: np.random.Generator) -> CompositeRouting:
    """Uniform draw from all_routings(code, t), by rejection on the span."""
    if not 0 <= t < code.k:
        raise InvalidOperand(f"prover index {t} outside [0, {code.k})")
    if not any(code.rows[t]):
        raise InvalidOperand(f"generator row {t} is zero; no codeword singles out prover {t}")
    spec = code.spec
    cols = code.columns()
    while True:
        coeffs = [spec.el(int(c)) for c in rng.integers(0, spec.q, size=code.k_prime)]
        v = [spec.zero] * code.k
        for c, col in zip(coeffs, cols):
            if c:
                v = [a + c * x for a, x in zip(v, col)]
        if v[t]:
            inv = v[t].inverse()
            return CompositeRouting(t, tuple(inv * x for x in v))


# -- combining answers across provers --
#
# Answers are combined per wire format: field elements and restriction
# polynomials scale by any v_j; digit pairs only scale by prime-subfield
# v_j (always the case at q = 2).  Provers weighted v_j = 0 contribute
# nothing and are not inspected.


def _digit_tuple(ans: object, p: int) -> tuple[int, ...] | None:
    if isinstance(ans, tuple) and ans and all(
        isinstance(b, int) and 0 <= b < p for b in ans
    ):
        return ans
    return None


def _scaled_answer(coeff: FieldElement, ans: object) -> object:
    if isinstance(ans, FieldElement):
        return coeff * ans
    if isinstance(ans, MultiPoly):
        if ans.spec != coeff.spec:
            raise FormatMismatch("polynomial answer over a different field")
        return ans.scale(coeff)
    p = coeff.spec.p
    digits = _digit_tuple(ans, p)
    if digits is None:
        raise FormatMismatch(f"answer {ans!r} is not a combinable format")
    if coeff.code >= p:
        raise FormatMismatch("digit answers only combine under prime-subfield weights")
    return tuple((coeff.code * b) % p for b in digits)


def _added_answers(a: object, b: object, p: int) -> object:
    if isinstance(a, FieldElement) and isinstance(b, FieldElement):
        return a + b
    if isinstance(a, MultiPoly) and isinstance(b, MultiPoly):
        if a.num_vars != b.num_vars or a.spec != b.spec:
            raise FormatMismatch("polynomial answers disagree on arity or field")
        return a + b
    da, db = _digit_tuple(a, p), _digit_tuple(b, p)
    if da is None or db is None or len(da) != len(db):
        raise FormatMismatch(f"cannot add answers {a!r} and {b!r}")
    return tuple((x + y) % p for x, y in zip(da, db))


def _negated_answer(a: object, p: int) -> object:
    if isinstance(a, (FieldElement, MultiPoly)):
        return -a
    da = _digit_tuple(a, p)
    if da is None:
        raise FormatMismatch(f"answer {a!r} is not a combinable format")
    return tuple((-x) % p for x in da)


def _zero_answer_like(a: object, p: int) -> object:
    if isinstance(a, FieldElement):
        return a.spec.zero
    if isinstance(a, MultiPoly):
        return MultiPoly.zero(a.spec, a.num_vars)
    da = _digit_tuple(a, p)
    if da is None:
        raise FormatMismatch(f"answer {a!r} is not a combinable format")
    return tuple(0 for _ in da)


def composite_answer(answers: Sequence[object], routing: CompositeRouting) -> object:
    """-sum over j != special of v_j A_j, in the answers' shared format.

    Raises FormatMismatch when the weighted answers do not share one of the
    combinable formats (field element, restriction polynomial, digit tuple).
    """
    v = routing.weights
    if len(answers) != len(v):
        raise LengthMismatch(f"{len(answers)} answers for {len(v)} weights")
    p = v[routing.special].spec.p
    acc: object | None = None
    for j, (vj, ans) in enumerate(zip(v, answers)):
        if j == routing.special or not vj:
            continue
        term = _scaled_answer(vj, ans)
        acc = term if acc is None else _added_answers(acc, term, p)
    if acc is None:
        acc = _zero_answer_like(answers[routing.special], p)
    return _negated_answer(acc, p)


# -- the k-prover membership game --


def _special_candidates(questions: tuple) -> list[int]:
    # positions t whose removal leaves all remaining questions identical;
    # with an order-symmetric base game, averaging over every consistent
    # reading reproduces the per-reading generation weights exactly
    out = []
    k = len(questions)
    for t in range(k):
        rest = [questions[j] for j in range(k) if j != t]
        if all(r == rest[0] for r in rest):
            out.append(t)
    return out


def codecheck_game(css: CssCode, inj: CoordInjection, d: int | None = None, level: int = 1) -> Game:
    """k-prover membership test driven by the two-prover low-degree game.

    For each base entry (Q, Q') and each special prover t, prover t gets Q
    and everyone else gets Q'; the entry weight is split evenly over t.  The
    predicate averages, over the hidden routings v, the base predicate
    applied to (answer of t, composite of the rest).
    """
    code = css.code
    spec = code.spec
    if inj.spec != spec:
        raise SpecMismatch("injection is over a different field than the code")
    if d is None:
        d = inj.degree
    k = code.k
    base = qlowdeg_game(spec, inj, d, level=level)
    routings = [all_routings(code, t) for t in range(k)]
    entries: list[tuple[tuple, float, str]] = []
    for (qa, qb), weight, branch in base.questions:
        for t in range(k):
            qtuple = tuple(qa if j == t else qb for j in range(k))
            entries.append((qtuple, weight / k, branch))

    def predicate(questions: tuple, answers: tuple) -> float:
        total = 0.0
        count = 0
        for t in _special_candidates(questions):
            qprime = questions[(t + 1) % k]
            for routing in routings[t]:
                count += 1
                try:
                    abar = composite_answer(answers, routing)
                except EprLabError:
                    continue
                total += base.predicate((questions[t], qprime), (answers[t], abar))
        return total / count if count else 0.0

    return Game(k, tuple(entries), predicate)


def honest_codecheck_strategy(
    css: CssCode,
    inj: CoordInjection,
    d: int | None = None,
    logical_state: StateVec | None = None,
) -> Strategy:
    """Each prover plays the intended two-prover strategy on its own share.

    The shared state is a codestate of C^(n+1): n register blocks plus one
    ancilla block, prover j holding position j of every block.  By default
    every block is the logical zero state; a logical_state on n+1 qudits is
    encoded blockwise instead, one qudit per block along the first logical
    qudit of the code.
    """
    spec = css.spec
    n = inj.n
    k = css.k
    if d is None:
        d = inj.degree
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
    layout = {
        j: (tuple(i * k + j for i in range(n)), n * k + j) for j in range(k)
    }
    resolver = honest_plan_resolver(spec, inj, d, layout)
    partition = [layout[j][0] + (layout[j][1],) for j in range(k)]
    return Strategy(state, partition, resolver)


def codecheck_exact_value(
    css: CssCode,
    inj: CoordInjection,
    strategy: Strategy,
    d: int | None = None,
    level: int = 1,
    budget: int = DEFAULT_CHECK_BUDGET,
) -> AcceptanceReport:
    """Exact membership-game value, grouping composite outcomes by their sum.

    Equal to exact_value on codecheck_game with the same parameters, but the
    joint outcomes of the k-1 broadcast provers are folded into a running
    composite answer, so the work per entry is linear rather than
    exponential in the prover count.  Assumes every plan's answers are in a
    combinable format; provers weighted zero are skipped outright.
    """
    code = css.code
    spec = code.spec
    if d is None:
        d = inj.degree
    k = code.k
    if strategy.num_players != k:
        raise InvalidOperand(f"strategy has {strategy.num_players} players, code length is {k}")
    base = qlowdeg_game(spec, inj, d, level=level)
    routings = [all_routings(code, t) for t in range(k)]
    est = len(base.questions) * k * len(routings[0]) * k * spec.p**4
    if est > budget:
        raise BudgetExceeded(f"estimated {est} composite applications pass {budget}")
    state = strategy.state
    p = spec.p

    # applied vectors depend only on the outcome operators and sites, but
    # answers also depend on the plan's map, so the two caches split
    applied_cache: dict[tuple, list[np.ndarray]] = {}
    answers_cache: dict[tuple[int, tuple], list[object]] = {}

    def special_vectors(t: int, question: tuple) -> list[tuple[object, np.ndarray]]:
        plan = strategy.plan(t, question)
        vkey = (t, id(plan.outcomes), plan.sites)
        vecs = applied_cache.get(vkey)
        if vecs is None:
            vecs = [
                apply_raw(state.vec, state.q, state.num_sites, mat, plan.sites)
                for _, mat in plan.outcomes
            ]
            applied_cache[vkey] = vecs
        akey = (t, question)
        ans = answers_cache.get(akey)
        if ans is None:
            ans = [plan.answer(label) for label, _ in plan.outcomes]
            answers_cache[akey] = ans
        return list(zip(ans, vecs))

    comp_cache: dict[tuple, list[tuple[object, np.ndarray]]] = {}

    def composite_vectors(qprime: tuple, routing: CompositeRouting) -> list[tuple[object, np.ndarray]]:
        t = routing.special
        key = (qprime, t, routing.weights)
        got = comp_cache.get(key)
        if got is not None:
            return got
        partial: list[tuple[object | None, np.ndarray]] = [(None, state.vec)]
        for j, vj in enumerate(routing.weights):
            if j == t or not vj:
                continue
            plan = strategy.plan(j, qprime)
            merged: dict[object | None, np.ndarray] = {}
            for running, vec in partial:
                for label, mat in plan.outcomes:
                    term = _scaled_answer(vj, plan.answer(label))
                    key2 = term if running is None else _added_answers(running, term, p)
                    nxt = apply_raw(vec, state.q, state.num_sites, mat, plan.sites)
                    if key2 in merged:
                        merged[key2] = merged[key2] + nxt
                    else:
                        merged[key2] = nxt
            partial = [
                (s, vec) for s, vec in merged.items() if np.vdot(vec, vec).real > 1e-20
            ]
        got = [
            (_negated_answer(s, p) if s is not None else None, vec) for s, vec in partial
        ]
        comp_cache[key] = got
        return got

    value = 0.0
    bweight: dict[str, float] = {}
    bvalue: dict[str, float] = {}
    for (qa, qb), weight, branch in base.questions:
        acc = 0.0
        for t in range(k):
            share = 1.0 / (k * len(routings[t]))
            svecs = special_vectors(t, qa)
            for routing in routings[t]:
                cvecs = composite_vectors(qb, routing)
                for ans, svec in svecs:
                    for abar, cvec in cvecs:
                        prob = float(np.vdot(svec, cvec).real)
                        if prob <= 1e-14:
                            continue
                        if abar is None:
                            abar = _zero_answer_like(ans, p)
                        v = base.predicate((qa, qb), (ans, abar))
                        if v:
                            acc += share * prob * v
        value += weight * acc
        bweight[branch] = bweight.get(branch, 0.0) + weight
        bvalue[branch] = bvalue.get(branch, 0.0) + weight * acc
    branches = {
        tag: BranchStat(w, bvalue[tag] / w if w > 0 else 0.0) for tag, w in bweight.items()
    }
    return AcceptanceReport("exact", value, 0.0, 0, None, branches)
