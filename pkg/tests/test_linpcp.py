"""Linear proof oracles, the constant-query test, and the summation game."""

import itertools
from pathlib import Path

import numpy as np
import pytest

from eprlab.css import css_from_code, epr_code, steane_code
from eprlab.errors import (
    BudgetExceeded,
    DimensionCap,
    FormatMismatch,
    InvalidOperand,
    LengthMismatch,
    NoLogicalQudit,
    SpecMismatch,
    UnsupportedPrime,
)
from eprlab.games import MeasurementPlan, Strategy, exact_value, mc_value
from eprlab.gf import field, vec_add, vec_dot, vec_neg
from eprlab.linpcp import (
    LinTestSpec,
    LinearProof,
    SumParams,
    adversarial_proof,
    build_proof,
    dump_proof,
    emitted_expectation,
    honest_sum_strategy,
    lin_test,
    load_proof,
    marginalize_check,
    proof_injection,
    sum_game,
)
from eprlab.qsim import StateVec, apply_raw, tau
from eprlab.rmpoly import CoordInjection, enumerate_points

FIXTURES = Path(__file__).parent / "fixtures" / "linpcp"


@pytest.fixture(scope="module")
def f2():
    return field(2, 1)


@pytest.fixture(scope="module")
def f4():
    return field(2, 2)


@pytest.fixture(scope="module")
def css2(f2):
    return css_from_code(epr_code(f2))


def exact_lin_acceptance(spec, table_fn, b, claimed, inj, g_eval):
    """Independent enumeration of the three checks; draws are independent,
    so the acceptance probability is the product of the per-check rates."""
    n = len(b)
    pts = list(enumerate_points(spec, n))
    lin_ok = sum(
        table_fn(u) + table_fn(v) == table_fn(vec_add(u, v)) for u in pts for v in pts
    )
    val_ok = sum(table_fn(u) + table_fn(vec_add(b, vec_neg(u))) == claimed for u in pts)
    xs = list(enumerate_points(spec, inj.m))
    enc_ok = 0
    for x in xs:
        xpi = inj.coord_expand(x)
        gx = g_eval(x)
        for u in pts:
            enc_ok += table_fn(u) + table_fn(vec_add(xpi, vec_neg(u))) == gx
    return (lin_ok / len(pts) ** 2) * (val_ok / len(pts)) * (enc_ok / (len(xs) * len(pts)))


@pytest.fixture(scope="module")
def ref(f2):
    a = (f2.el(1), f2.el(0), f2.el(1))
    b = (f2.el(1), f2.el(1), f2.el(0))
    inj = CoordInjection(f2, 3, 2, 2)
    g = inj.encode(a)
    return {
        "a": a,
        "b": b,
        "c": vec_dot(a, b),
        "inj": inj,
        "g": g,
        "proof": build_proof(a, b),
        "test": LinTestSpec(b, vec_dot(a, b), inj),
    }


# -- proof construction --


def test_zero_vector_gives_zero_table(f2):
    a = (f2.zero, f2.zero)
    proof = build_proof(a, a)
    assert all(x == f2.zero for x in proof.table)
    assert proof.is_honest


def test_table_is_entrywise_linear(f4):
    rng = np.random.default_rng(3)
    for _ in range(20):
        a1 = tuple(f4.el(int(rng.integers(4))) for _ in range(2))
        a2 = tuple(f4.el(int(rng.integers(4))) for _ in range(2))
        p1 = build_proof(a1, a1)
        p2 = build_proof(a2, a2)
        psum = build_proof(vec_add(a1, a2), a1)
        assert all(x + y == z for x, y, z in zip(p1.table, p2.table, psum.table))


def test_honest_invariant_exhaustive(f2, f4):
    for spec, max_n in ((f2, 4), (f4, 2)):
        for n in range(1, max_n + 1):
            for a in itertools.product(spec.elements(), repeat=n):
                proof = build_proof(a, a)
                for u in enumerate_points(spec, n):
                    assert proof.lookup(u) == vec_dot(u, a)


def test_table_agrees_with_encoding(f2, ref):
    # the coordinate expansion of any question point indexes the table at
    # the encoded polynomial's value there
    g, inj, proof = ref["g"], ref["inj"], ref["proof"]
    for x in enumerate_points(f2, inj.m):
        assert proof.lookup(inj.coord_expand(x)) == g.eval(x)


def test_self_correction_identity(f2, ref):
    proof = ref["proof"]
    for w in enumerate_points(f2, 3):
        for u in enumerate_points(f2, 3):
            assert proof.lookup(u) + proof.lookup(vec_add(w, vec_neg(u))) == proof.lookup(w)


def test_dimension_cap(f2):
    a = tuple(f2.el(1) for _ in range(17))
    with pytest.raises(DimensionCap):
        build_proof(a, a)
    with pytest.raises(DimensionCap):
        proof_injection(f2, 17)


def test_proof_injection_sizing(f2, f4):
    assert proof_injection(f2, 1).m == 2
    assert proof_injection(f2, 3).m == 3
    assert proof_injection(f4, 2).m == 4


def test_dump_load_roundtrip(f2, f4, ref):
    back = load_proof(dump_proof(ref["proof"]))
    assert back.table == ref["proof"].table
    assert not back.is_honest
    a4 = (f4.el(3), f4.el(2))
    p4 = build_proof(a4, a4)
    assert load_proof(dump_proof(p4)).table == p4.table


def test_load_rejects_malformed():
    bads = [
        "",
        "2 1\n0 0\n",
        "junk header line\n",
        "2 1 2\n0 0\n1 1\n2 0\n3 1\n0 1\n",
        "2 1 2\n0 0\n1 1\n2 0\n",
        "2 1 2\n0 0\n1 1\n2 0\n3 7\n",
        "2 1 2\n0 0\n1 1\n2 0\n9 1\n",
    ]
    for text in bads:
        with pytest.raises(FormatMismatch):
            load_proof(text)


# -- the constant-query test --


def test_lin_test_honest_accepts(ref):
    g = ref["g"]
    rng = np.random.default_rng(7)
    for _ in range(120):
        assert lin_test(ref["proof"], g.eval, ref["test"], rng)


def test_lin_test_wrong_claim_rejects(f2, ref):
    g = ref["g"]
    wrong = LinTestSpec(ref["b"], ref["c"] + f2.el(1), ref["inj"])
    rng = np.random.default_rng(8)
    for _ in range(120):
        assert not lin_test(ref["proof"], g.eval, wrong, rng)


def test_lin_test_read_counts(ref):
    counts = [0, 0]
    proof = ref["proof"]

    class Spy:
        spec, n, table = proof.spec, proof.n, proof.table

        def lookup(self, u):
            counts[0] += 1
            return proof.lookup(u)

    def g_spy(x):
        counts[1] += 1
        return ref["g"].eval(x)

    rng = np.random.default_rng(9)
    lin_test(Spy(), g_spy, ref["test"], rng)
    assert counts == [7, 1]


def test_lin_test_budget(f2, ref):
    tight = LinTestSpec(ref["b"], ref["c"], ref["inj"], budget=5)
    rng = np.random.default_rng(10)
    with pytest.raises(BudgetExceeded):
        lin_test(ref["proof"], ref["g"].eval, tight, rng)
    with pytest.raises(InvalidOperand):
        LinTestSpec(ref["b"], ref["c"], ref["inj"], budget=9)


def test_quarter_distance_family(f2, ref):
    # every two-flip corruption of the honest table sits at relative
    # distance exactly 1/4 from the nearest linear table, and the exactly
    # enumerated rejection probability clears the measured floor
    pts = list(enumerate_points(f2, 3))
    linear_tables = [
        tuple(vec_dot(u, v) for u in pts)
        for v in itertools.product(f2.elements(), repeat=3)
    ]
    one = f2.el(1)
    worst = 1.0
    for i, j in itertools.combinations(range(8), 2):
        t = list(ref["proof"].table)
        t[i], t[j] = t[i] + one, t[j] + one
        t = tuple(t)
        dist = min(sum(x != y for x, y in zip(t, lt)) for lt in linear_tables)
        assert dist == 2
        proof = adversarial_proof(f2, 3, t)
        accept = exact_lin_acceptance(f2, proof.lookup, ref["b"], ref["c"], ref["inj"], ref["g"].eval)
        worst = min(worst, 1.0 - accept)
    assert worst >= 0.125
    assert worst == pytest.approx(0.609375, abs=1e-12)


def test_sampled_agreement_with_enumeration(f2, ref):
    one = f2.el(1)
    t = list(ref["proof"].table)
    t[0], t[3] = t[0] + one, t[3] + one
    proof = adversarial_proof(f2, 3, tuple(t))
    exact = exact_lin_acceptance(f2, proof.lookup, ref["b"], ref["c"], ref["inj"], ref["g"].eval)
    rng = np.random.default_rng(2026)
    trials = 3000
    hits = sum(lin_test(proof, ref["g"].eval, ref["test"], rng) for _ in range(trials))
    assert abs(hits / trials - exact) < 0.05


def test_nested_flip_chain_monotone(f2, ref):
    # shipped fixture family: each file adds one flip to the previous one,
    # and the exact rejection probability never decreases along the chain
    rejections = []
    prev = None
    for m in range(1, 5):
        proof = load_proof((FIXTURES / f"flip{m}.txt").read_text())
        assert not proof.is_honest
        if prev is not None:
            flips = sum(x != y for x, y in zip(proof.table, prev.table))
            assert flips == 1
        prev = proof
        accept = exact_lin_acceptance(f2, proof.lookup, ref["b"], ref["c"], ref["inj"], ref["g"].eval)
        rejections.append(1.0 - accept)
    assert all(x <= y + 1e-15 for x, y in zip(rejections, rejections[1:]))
    assert rejections[0] > 0.5
    assert rejections[-1] == pytest.approx(1.0, abs=1e-12)


# -- summation game completeness --


def _epr_instance(f2, css2, n, outer_level, inner_level, wtag="Z", bs=None):
    inj = CoordInjection(f2, n, 2, 2)
    params = SumParams(inj, outer_level=outer_level, inner_level=inner_level)
    if bs is None:
        b = tuple(f2.el(1) if i % 2 == 0 else f2.el(0) for i in range(n))
        bs = (b, b)
    game = sum_game(css2, wtag, bs, params)
    strat = honest_sum_strategy(css2, params)
    return game, strat


@pytest.fixture(scope="module")
def small_game(f2, css2):
    game, strat = _epr_instance(f2, css2, 2, 1, 1)
    report = exact_value(game, strat)
    return game, strat, report


def test_completeness_small(small_game):
    game, strat, report = small_game
    assert report.value == pytest.approx(1.0, abs=1e-9)
    for branch, stat in report.branches.items():
        assert stat.value == pytest.approx(1.0, abs=1e-9), branch


def test_completeness_composed_levels(f2, css2):
    game, strat = _epr_instance(f2, css2, 2, 2, 2)
    report = exact_value(game, strat, budget=4_000_000)
    assert report.value == pytest.approx(1.0, abs=1e-9)
    for branch, stat in report.branches.items():
        assert stat.value == pytest.approx(1.0, abs=1e-9), branch


def test_completeness_three_coordinates(f2, css2):
    game, strat = _epr_instance(f2, css2, 3, 1, 1)
    report = exact_value(game, strat, budget=4_000_000)
    assert report.value == pytest.approx(1.0, abs=1e-9)
    for branch, stat in report.branches.items():
        assert stat.value == pytest.approx(1.0, abs=1e-9), branch


def test_completeness_x_basis(f2, css2):
    game, strat = _epr_instance(f2, css2, 2, 1, 1, wtag="X")
    report = exact_value(game, strat)
    assert report.value == pytest.approx(1.0, abs=1e-9)


def test_mc_agrees(small_game):
    game, strat, _ = small_game
    report = mc_value(game, strat, trials=200, seed=5)
    assert report.value == pytest.approx(1.0, abs=1e-9)


# -- the emitted value --


def dense_expectation(css, state, wtag, bs):
    """Direct tensor-observable expectation at the prover sites."""
    spec = css.spec
    k, n = css.k, len(bs[0])
    cur = state.vec
    for j in range(k):
        for i in range(n):
            op = tau(spec, wtag, bs[j][i]).mat
            cur = apply_raw(cur, spec.q, state.num_sites, op, (i * k + j,))
    return float(np.vdot(state.vec, cur).real)


def test_emission_matches_dense_oracle(f2, css2):
    e0, e1 = f2.el(0), f2.el(1)
    cases = [
        ("Z", ((e1, e1), (e1, e1))),
        ("Z", ((e1, e1), (e0, e1))),
        ("Z", ((e1, e0), (e1, e0))),
        ("X", ((e1, e1), (e1, e1))),
        ("X", ((e0, e1), (e1, e0))),
    ]
    inj = CoordInjection(f2, 2, 2, 2)
    params = SumParams(inj)
    strat = honest_sum_strategy(css2, params)
    for wtag, bs in cases:
        game = sum_game(css2, wtag, bs, params)
        report = emitted_expectation(game, strat)
        want = dense_expectation(css2, strat.state, wtag, bs)
        assert report.accept_prob == pytest.approx(1.0, abs=1e-9)
        assert report.expectation == pytest.approx(want, abs=1e-9), (wtag, bs)


def test_logical_state_needs_a_logical_qudit(f2, css2):
    # the code behind the two-prover instance has a fixed codestate, so a
    # supplied logical state has nowhere to go
    vec = np.zeros(8)
    vec[0b000] = vec[0b110] = 1 / np.sqrt(2)
    logical = StateVec(2, 3, vec)
    inj = CoordInjection(f2, 2, 2, 2)
    with pytest.raises(NoLogicalQudit):
        honest_sum_strategy(css2, SumParams(inj), logical_state=logical)


def test_zero_vector_claims_and_emits_plus_one(f2, css2):
    bz = (f2.el(0), f2.el(0))
    inj = CoordInjection(f2, 2, 2, 2)
    params = SumParams(inj)
    game = sum_game(css2, "Z", (bz, bz), params)
    strat = honest_sum_strategy(css2, params)
    report = emitted_expectation(game, strat)
    assert report.expectation == pytest.approx(1.0, abs=1e-9)
    # the claimed value inside every answer of a value-round plan is zero
    dq = next(qt for qt, _, br in game.questions if br == "d" and qt[0][3] == "val")
    plan = strat.plan(0, dq[0])
    for label, _ in plan.outcomes:
        assert plan.answer(label)[0] == f2.zero


def test_flipped_claim_rejected_exactly(f2, css2, small_game):
    game, honest, _ = small_game
    one = f2.el(1)

    def flip(player, question):
        plan = honest.plan(player, question)
        if player != 0:
            return plan
        if question[0] == "dq":
            amap = lambda lab: (lambda a: (a[0] + one,) + a[1:])(plan.answer(lab))
        elif question[0] == "ccrv" and question[3] == "val":
            amap = lambda lab: (lambda a: (a[0] + one, a[1]))(plan.answer(lab))
        else:
            return plan
        return MeasurementPlan(plan.outcomes, plan.sites, amap)

    cheat = Strategy(honest.state, honest.partition, flip)
    report = exact_value(game, cheat)
    # the claim binds in half the curve-round mass it appears in and half
    # the value round: 1 - 1/4 * 1/8 - 1/4 * 1/2
    assert report.value == pytest.approx(27 / 32, abs=1e-9)
    assert report.branches["d"].value == pytest.approx(0.5, abs=1e-9)
    assert report.branches["c:val-crv"].value == pytest.approx(0.5, abs=1e-9)
    for branch, stat in report.branches.items():
        if branch not in ("d", "c:val-crv"):
            assert stat.value == pytest.approx(1.0, abs=1e-9), branch
    em = emitted_expectation(game, cheat)
    assert em.accept_prob == pytest.approx(0.5, abs=1e-9)
    assert em.conditional == pytest.approx(-1.0, abs=1e-9)


# -- structure and guards --


def test_quaternary_game_has_linearity_round(f4):
    css4 = css_from_code(epr_code(f4))
    inj = CoordInjection(f4, 1, 2, 2)
    params = SumParams(inj)
    b = ((f4.el(3),), (f4.el(3),))
    game = sum_game(css4, "Z", b, params)
    branches = {br for _, _, br in game.questions}
    assert "c:blr-pt" in branches and "c:blr-crv" in branches
    strat = honest_sum_strategy(css4, params)
    report = mc_value(game, strat, trials=40, seed=11)
    assert report.value == pytest.approx(1.0, abs=1e-9)


def test_value_round_draws_shared(f2):
    # the verifier draw is shared, so seven provers cost no more value-round
    # entries than two: one entry per (flavor, draw), not a per-prover product
    css7 = css_from_code(steane_code(f2))
    inj = CoordInjection(f2, 2, 2, 2)
    bs = tuple((f2.el(1), f2.el(0)) for _ in range(7))
    game = sum_game(css7, "Z", bs, SumParams(inj))
    d_entries = [e for e in game.questions if e[2] == "d"]
    assert 0 < len(d_entries) <= 32
    for qtuple, _, _ in d_entries:
        flavors = {q[3] for q in qtuple}
        assert len(flavors) == 1
        assert len(qtuple) == 7


def test_construction_guards(f2, css2):
    inj = CoordInjection(f2, 2, 2, 2)
    b = (f2.el(1), f2.el(1))
    with pytest.raises(InvalidOperand):
        sum_game(css2, "Y", (b, b), SumParams(inj))
    with pytest.raises(LengthMismatch):
        sum_game(css2, "Z", (b,), SumParams(inj))
    nine = field(3, 2)
    with pytest.raises(UnsupportedPrime):
        sum_game(css_from_code(epr_code(nine)), "Z", (b, b), SumParams(inj))
    f4 = field(2, 2)
    with pytest.raises(SpecMismatch):
        sum_game(css2, "Z", (b, b), SumParams(CoordInjection(f4, 2, 2, 2)))


def test_part_weight_knob(f2, css2):
    inj = CoordInjection(f2, 2, 2, 2)
    b = (f2.el(1), f2.el(1))
    game = sum_game(css2, "Z", (b, b), SumParams(inj, part_weights=(0.4, 0.3, 0.2, 0.1)))
    mass = {"a": 0.0, "b": 0.0, "c": 0.0, "d": 0.0}
    for _, w, br in game.questions:
        mass[br[0] if br[0] in mass else "b"] += w
    assert mass["a"] == pytest.approx(0.4, abs=1e-9)
    assert mass["b"] == pytest.approx(0.3, abs=1e-9)
    assert mass["c"] == pytest.approx(0.2, abs=1e-9)
    assert mass["d"] == pytest.approx(0.1, abs=1e-9)
    for bad in ((0.5, 0.5, 0.1, -0.1), (0.2, 0.2, 0.2), (0.3, 0.3, 0.3, 0.3)):
        with pytest.raises(InvalidOperand):
            SumParams(inj, part_weights=bad)


def test_zero_weight_part_is_omitted(f2, css2):
    inj = CoordInjection(f2, 2, 2, 2)
    b = (f2.el(1), f2.el(1))
    game = sum_game(css2, "Z", (b, b), SumParams(inj, part_weights=(0.5, 0.5, 0.0, 0.0)))
    branches = {br for _, _, br in game.questions}
    assert not any(br.startswith("c:") or br == "d" for br in branches)
    strat = honest_sum_strategy(css2, SumParams(inj))
    with pytest.raises(InvalidOperand):
        emitted_expectation(game, strat)


def test_construction_deterministic(f2, css2):
    inj = CoordInjection(f2, 2, 2, 2)
    b = (f2.el(1), f2.el(0))
    params = SumParams(inj)
    g1 = sum_game(css2, "Z", (b, b), params)
    g2 = sum_game(css2, "Z", (b, b), params)
    assert len(g1.questions) == len(g2.questions)
    for (qa, wa, ba), (qb, wb, bb) in zip(g1.questions, g2.questions):
        assert qa == qb and ba == bb and wa == pytest.approx(wb, abs=0)


def test_malformed_answers_reject(small_game):
    game, strat, _ = small_game
    by_branch = {}
    for qtuple, _, br in game.questions:
        by_branch.setdefault(br, qtuple)
    garbage = [None, 5, (1, 2, 3), "x", ((), ())]
    for br, qtuple in by_branch.items():
        for ans in garbage:
            assert game.predicate(qtuple, (ans,) * game.num_players) == 0.0, br


# -- the product-form diagnostic --


def test_marginalize_honest_zero(small_game):
    game, strat, report = small_game
    assert marginalize_check(game, strat) == pytest.approx(0.0, abs=1e-14)
    # the zero residual goes along with a passing broadcast round
    assert report.branches["a"].value == pytest.approx(1.0, abs=1e-9)


def test_marginalize_flags_planted_correlation(f2, small_game):
    game, honest, _ = small_game
    # answers perfectly correlated across two mutually unbiased single-site
    # observables: no product of commuting marginals reproduces that joint
    eye = np.eye(2)
    pz0 = np.diag([1.0, 0.0])
    px1 = 0.5 * np.array([[1.0, -1.0], [-1.0, 1.0]])
    m1 = np.kron(pz0, eye) / 2
    m2 = np.kron(px1, eye) / 2
    outcomes = [((0, 0), m1), ((1, 1), m2), ((2, 2), np.eye(4) - m1 - m2)]

    def planted(player, question):
        if question[0] == "ajoint" and player == 1:
            return MeasurementPlan(outcomes, (1, 3), None, False)
        return honest.plan(player, question)

    strat = Strategy(honest.state, honest.partition, planted)
    residual = marginalize_check(game, strat)
    assert residual == pytest.approx(11 / 64, abs=1e-12)
