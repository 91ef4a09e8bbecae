"""Dense simulation of qudit registers over GF(q): generalized Pauli
operators, Fourier transform, EPR states, projective measurements grouped by
polynomial restrictions, and the spectral utilities the protocol analysis
leans on (root rounding, joint refinement of near-commuting observables).

Site layout: a register of n sites has amplitude index sum_i code_i * q^(n-1-i),
so site 0 is the most significant axis and kron order matches site order.
Tolerances: CONSTRUCT_ATOL guards structural invariants at build time,
ACCEPT_ATOL is the looser comparison used by protocol-level checks.
"""

from __future__ import annotations

import cmath
import math
import struct
from typing import Sequence

import numpy as np

from .errors import (
    DimensionCap,
    DimensionMismatch,
    InvalidOperand,
    NotNormal,
)
from .gf import FieldElement, FieldSpec, SelfDualBasis
from .rmpoly import AffineSubspace, CoordInjection, MultiPoly, restrict_to_subspace

CONSTRUCT_ATOL = 1e-10
ACCEPT_ATOL = 1e-9
MAX_AMPLITUDES = 1 << 24


def root_of_unity(p: int) -> complex:
    return cmath.exp(2j * cmath.pi / p)


class StateVec:
    """Pure state of a register of `num_sites` qudits with site dimension q."""

    __slots__ = ("q", "num_sites", "vec")

    def __init__(self, q: int, num_sites: int, vec: np.ndarray):
        vec = np.asarray(vec, dtype=np.complex128)
        if vec.shape != (q**num_sites,):
            raise DimensionMismatch(
                f"amplitude vector has shape {vec.shape}, expected ({q**num_sites},)"
            )
        if abs(np.linalg.norm(vec) - 1.0) > CONSTRUCT_ATOL:
            raise InvalidOperand("state vector is not normalized")
        self.q = q
        self.num_sites = num_sites
        self.vec = vec

    @staticmethod
    def computational(q: int, codes: Sequence[int]) -> StateVec:
        n = len(codes)
        idx = 0
        for c in codes:
            idx = idx * q + int(c)
        vec = np.zeros(q**n, dtype=np.complex128)
        vec[idx] = 1.0
        return StateVec(q, n, vec)

    def tensor(self, other: StateVec) -> StateVec:
        if self.q != other.q:
            raise DimensionMismatch("site dimensions differ")
        return StateVec(self.q, self.num_sites + other.num_sites, np.kron(self.vec, other.vec))

    def inner(self, other: StateVec) -> complex:
        if self.vec.shape != other.vec.shape:
            raise DimensionMismatch("state dimensions differ")
        return complex(np.vdot(self.vec, other.vec))

    def to_bytes(self) -> bytes:
        head = struct.pack("<II", self.q, self.num_sites)
        return head + np.ascontiguousarray(self.vec).view(np.float64).tobytes()

    @staticmethod
    def from_bytes(data: bytes) -> StateVec:
        q, n = struct.unpack_from("<II", data)
        flat = np.frombuffer(data[8:], dtype=np.float64).view(np.complex128)
        return StateVec(q, n, flat.copy())


class DenseOp:
    """Square operator on a qudit register, with verified structure flags."""

    __slots__ = ("mat", "unitary", "hermitian")

    def __init__(self, mat: np.ndarray, unitary: bool | None = None, hermitian: bool | None = None):
        mat = np.asarray(mat, dtype=np.complex128)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"operator must be square, got {mat.shape}")
        eye = np.eye(mat.shape[0])
        is_u = bool(np.allclose(mat @ mat.conj().T, eye, atol=CONSTRUCT_ATOL))
        is_h = bool(np.allclose(mat, mat.conj().T, atol=CONSTRUCT_ATOL))
        if unitary is True and not is_u:
            raise InvalidOperand("operator flagged unitary is not unitary")
        if hermitian is True and not is_h:
            raise InvalidOperand("operator flagged hermitian is not hermitian")
        self.mat = mat
        self.unitary = is_u if unitary is None else unitary
        self.hermitian = is_h if hermitian is None else hermitian

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def dagger(self) -> DenseOp:
        return DenseOp(self.mat.conj().T)

    def __matmul__(self, other: DenseOp) -> DenseOp:
        return DenseOp(self.mat @ other.mat)

    def tensor(self, other: DenseOp) -> DenseOp:
        return DenseOp(np.kron(self.mat, other.mat))

    def scale(self, c: complex) -> DenseOp:
        return DenseOp(self.mat * c)

    def __add__(self, other: DenseOp) -> DenseOp:
        return DenseOp(self.mat + other.mat)

    def __sub__(self, other: DenseOp) -> DenseOp:
        return DenseOp(self.mat - other.mat)

    def close_to(self, other: DenseOp, atol: float = ACCEPT_ATOL) -> bool:
        return bool(np.allclose(self.mat, other.mat, atol=atol))

    def power(self, k: int) -> DenseOp:
        return DenseOp(np.linalg.matrix_power(self.mat, k))

    def to_bytes(self) -> bytes:
        head = struct.pack("<I", self.dim)
        return head + np.ascontiguousarray(self.mat).view(np.float64).tobytes()

    @staticmethod
    def from_bytes(data: bytes) -> DenseOp:
        (dim,) = struct.unpack_from("<I", data)
        flat = np.frombuffer(data[4:], dtype=np.float64).view(np.complex128)
        return DenseOp(flat.reshape(dim, dim).copy())


def identity_op(dim: int) -> DenseOp:
    return DenseOp(np.eye(dim), unitary=True, hermitian=True)


# -- generalized Paulis --


def tau(spec: FieldSpec, basis: str, a: FieldElement) -> DenseOp:
    """Single-site generalized Pauli: shift by a (X) or phase by tr(a j) (Z)."""
    if basis not in ("X", "Z"):
        raise InvalidOperand(f"basis must be X or Z, got {basis!r}")
    q = spec.q
    w = root_of_unity(spec.p)
    mat = np.zeros((q, q), dtype=np.complex128)
    if basis == "X":
        for j in range(q):
            mat[spec.add_code(j, a.code), j] = 1.0
    else:
        for j in range(q):
            mat[j, j] = w ** spec.trace_code(spec.mul_code(a.code, j))
    return DenseOp(mat, unitary=True)


def pauli_word(spec: FieldSpec, basis: str, a: Sequence[FieldElement]) -> DenseOp:
    """Tensor product of single-site Paulis, one factor per entry of a."""
    n = len(a)
    if n * math.log2(spec.q) > 24:
        raise DimensionCap(f"{n} sites of dimension {spec.q} exceed the dense cap")
    acc = identity_op(1)
    for ai in a:
        acc = acc.tensor(tau(spec, basis, ai))
    return acc


def sigma(spec: FieldSpec, basis: str, ell: int, a: int, sdb: SelfDualBasis | None = None) -> DenseOp:
    """Single-qupit Pauli: tau_W(a * b_ell) for the ell-th self-dual basis vector.

    ell is 1-based; a is a Z_p exponent.
    """
    from .gf import self_dual_basis

    if sdb is None:
        sdb = self_dual_basis(spec)
    if not 1 <= ell <= spec.t:
        raise InvalidOperand(f"qupit index {ell} outside 1..{spec.t}")
    return tau(spec, basis, spec.lift(a) * sdb.basis[ell - 1])


def fourier(spec: FieldSpec) -> DenseOp:
    """The GF(q) Fourier transform, sending Z-basis states to X-basis states."""
    q = spec.q
    w = root_of_unity(spec.p)
    mat = np.zeros((q, q), dtype=np.complex128)
    for j in range(q):
        for k in range(q):
            mat[j, k] = w ** (-spec.trace_code(spec.mul_code(j, k)))
    return DenseOp(mat / math.sqrt(q), unitary=True)


def coords_permutation(spec: FieldSpec, sdb: SelfDualBasis) -> DenseOp:
    """Relabeling |a> -> |coords(a)> between the field basis and the qupit
    tensor basis; conjugating by it exhibits qupit factorizations."""
    q = spec.q
    mat = np.zeros((q, q), dtype=np.complex128)
    for a in spec.elements():
        idx = 0
        for d in sdb.coords(a):
            idx = idx * spec.p + d
        mat[idx, a.code] = 1.0
    return DenseOp(mat, unitary=True)


def epr_state(spec: FieldSpec, n: int) -> StateVec:
    """n EPR pairs over GF(q): sites 0..n-1 are one share, n..2n-1 the other."""
    q = spec.q
    if q ** (2 * n) > MAX_AMPLITUDES:
        raise DimensionCap(f"{2 * n} sites of dimension {q} exceed the dense cap")
    vec = np.eye(q**n, dtype=np.complex128).reshape(-1) / math.sqrt(q**n)
    return StateVec(q, 2 * n, vec)


# -- applying operators to chosen sites --


def apply_raw(
    vec: np.ndarray, q: int, num_sites: int, op: np.ndarray, sites: Sequence[int]
) -> np.ndarray:
    """apply_to_sites on a bare (possibly unnormalized) amplitude vector."""
    k = len(sites)
    if op.shape != (q**k, q**k):
        raise DimensionMismatch(f"operator shape {op.shape} does not cover {k} sites")
    if len(set(sites)) != k or any(not 0 <= s < num_sites for s in sites):
        raise InvalidOperand(f"bad site list {sites} for {num_sites} sites")
    tens = vec.reshape((q,) * num_sites)
    op_t = op.reshape((q,) * (2 * k))
    moved = np.tensordot(op_t, tens, axes=(list(range(k, 2 * k)), list(sites)))
    # tensordot puts the contracted axes first; send them home
    return np.moveaxis(moved, list(range(k)), list(sites)).reshape(-1)


def apply_to_sites(state: StateVec, op: np.ndarray, sites: Sequence[int]) -> np.ndarray:
    """Raw amplitude vector of (op on sites, identity elsewhere) applied to state."""
    return apply_raw(state.vec, state.q, state.num_sites, op, sites)


def expect_on_sites(state: StateVec, op: np.ndarray, sites: Sequence[int]) -> complex:
    return complex(np.vdot(state.vec, apply_to_sites(state, op, sites)))


# -- measurements --


class ProjMeasurement:
    """Projective measurement on a k-site register, with hashable outcome labels."""

    def __init__(self, q: int, num_sites: int, outcomes: Sequence[tuple[object, np.ndarray]]):
        dim = q**num_sites
        total = np.zeros((dim, dim), dtype=np.complex128)
        mats = []
        for label, mat in outcomes:
            mat = np.asarray(mat, dtype=np.complex128)
            if mat.shape != (dim, dim):
                raise DimensionMismatch(f"projector shape {mat.shape}, expected {dim}")
            if not np.allclose(mat, mat.conj().T, atol=CONSTRUCT_ATOL):
                raise InvalidOperand(f"projector for {label!r} is not hermitian")
            if not np.allclose(mat @ mat, mat, atol=CONSTRUCT_ATOL):
                raise InvalidOperand(f"projector for {label!r} is not idempotent")
            total += mat
            mats.append((label, mat))
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                if not np.allclose(mats[i][1] @ mats[j][1], 0, atol=CONSTRUCT_ATOL):
                    raise InvalidOperand(
                        f"projectors for {mats[i][0]!r} and {mats[j][0]!r} overlap"
                    )
        if not np.allclose(total, np.eye(dim), atol=CONSTRUCT_ATOL):
            raise InvalidOperand("projectors do not sum to the identity")
        self.q = q
        self.num_sites = num_sites
        self.outcomes = mats

    def labels(self) -> list[object]:
        return [label for label, _ in self.outcomes]

    def projector(self, label: object) -> np.ndarray:
        for lab, mat in self.outcomes:
            if lab == label:
                return mat
        raise InvalidOperand(f"no outcome labeled {label!r}")


def basis_measurement(spec: FieldSpec, basis: str, num_sites: int) -> ProjMeasurement:
    """Site-wise W-basis measurement with outcomes in GF(q)^n.

    Z outcomes label computational basis vectors; X outcomes label their
    Fourier transforms, so tau_X(a) has eigenvalue w^tr(a.e) on outcome e.
    """
    q = spec.q
    if q**num_sites > 1 << 12:
        raise DimensionCap("too many outcomes for a dense basis measurement")
    f_all = None
    if basis == "X":
        f1 = fourier(spec).mat
        f_all = np.array([[1.0]], dtype=np.complex128)
        for _ in range(num_sites):
            f_all = np.kron(f_all, f1)
    elif basis != "Z":
        raise InvalidOperand(f"basis must be X or Z, got {basis!r}")
    outcomes = []
    for idx in range(q**num_sites):
        codes, rest = [], idx
        for _ in range(num_sites):
            codes.append(rest % q)
            rest //= q
        codes.reverse()
        label = tuple(spec.el(c) for c in codes)
        col = np.zeros(q**num_sites, dtype=np.complex128)
        col[idx] = 1.0
        if f_all is not None:
            col = f_all @ col
        outcomes.append((label, np.outer(col, col.conj())))
    return ProjMeasurement(q, num_sites, outcomes)


def subspace_measurement(
    spec: FieldSpec,
    basis: str,
    s: AffineSubspace,
    inj: CoordInjection,
    degree_bound: int | None = None,
    conjugate: bool = False,
) -> ProjMeasurement:
    """Measure all n sites in basis W and report the restriction of the
    low-degree encoding of the outcome to the subspace s.

    Every reachable outcome is a restriction of an encoding, so its total
    degree stays within degree_bound when one is declared.  With
    conjugate=True the X-basis outcome is negated before encoding (the second
    EPR share's answers transform with a sign flip); Z outcomes are unchanged.
    """
    base = basis_measurement(spec, basis, inj.n)
    groups: dict[MultiPoly, np.ndarray] = {}
    for label, mat in base.outcomes:
        a = label
        if conjugate and basis == "X":
            a = tuple(-x for x in a)
        key = restrict_to_subspace(inj.encode(a), s)
        if degree_bound is not None and key.total_degree() > degree_bound:
            raise InvalidOperand(
                f"restricted outcome degree {key.total_degree()} exceeds {degree_bound}"
            )
        if key in groups:
            groups[key] = groups[key] + mat
        else:
            groups[key] = mat
    return ProjMeasurement(spec.q, inj.n, sorted(groups.items(), key=lambda kv: kv[0].canonical()))


def outcome_distribution(
    state: StateVec, meas: ProjMeasurement, sites: Sequence[int] | None = None
) -> dict[object, float]:
    """Born-rule probability table; entries sum to 1 within CONSTRUCT_ATOL."""
    if sites is None:
        sites = list(range(meas.num_sites))
    probs = {}
    for label, mat in meas.outcomes:
        post = apply_to_sites(state, mat, sites)
        probs[label] = float(np.real(np.vdot(state.vec, post)))
    total = sum(probs.values())
    if abs(total - 1.0) > CONSTRUCT_ATOL:
        raise InvalidOperand(f"outcome probabilities sum to {total}")
    return probs


def measure(
    state: StateVec,
    meas: ProjMeasurement,
    rng: np.random.Generator,
    sites: Sequence[int] | None = None,
) -> tuple[object, StateVec]:
    """Sample an outcome and return it with the collapsed state."""
    if sites is None:
        sites = list(range(meas.num_sites))
    labels = []
    posts = []
    probs = []
    for label, mat in meas.outcomes:
        post = apply_to_sites(state, mat, sites)
        labels.append(label)
        posts.append(post)
        probs.append(max(float(np.real(np.vdot(state.vec, post))), 0.0))
    total = sum(probs)
    if abs(total - 1.0) > CONSTRUCT_ATOL:
        raise InvalidOperand(f"outcome probabilities sum to {total}")
    pick = int(rng.choice(len(labels), p=np.array(probs) / total))
    post = posts[pick]
    norm = np.linalg.norm(post)
    return labels[pick], StateVec(state.q, state.num_sites, post / norm)


# -- generalized observables --


class GenObservable:
    """Unitary of order p together with its outcome decomposition
    U = sum_e w^e P^e over Z_p exponents of the p-th root of unity w."""

    def __init__(self, op: DenseOp, p: int):
        if not op.unitary:
            raise InvalidOperand("generalized observables must be unitary")
        upow = op.power(p)
        if not np.allclose(upow.mat, np.eye(op.dim), atol=ACCEPT_ATOL):
            raise InvalidOperand(f"operator does not have order dividing {p}")
        w = root_of_unity(p)
        projs = []
        total = np.zeros((op.dim, op.dim), dtype=np.complex128)
        for e in range(p):
            acc = np.zeros((op.dim, op.dim), dtype=np.complex128)
            for k in range(p):
                acc += w ** (-e * k) * np.linalg.matrix_power(op.mat, k)
            acc /= p
            projs.append(acc)
            total += acc
        if not np.allclose(total, np.eye(op.dim), atol=ACCEPT_ATOL):
            raise InvalidOperand("eigenprojectors do not resolve the identity")
        self.op = op
        self.p = p
        self.projectors = projs

    def reconstructed(self) -> np.ndarray:
        w = root_of_unity(self.p)
        return sum(w**e * pe for e, pe in enumerate(self.projectors))


def joint_refine(
    observables: Sequence[GenObservable], psi: StateVec | None = None
) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """POVM over Z_p^k refining the observables' outcome projectors.

    Element for outcome a is the sandwich P_k ... P_2 P_1 P_2 ... P_k with
    P_i the a_i-th projector of observable i; completeness telescopes.  The
    state argument is accepted for signature symmetry with the measurement
    helpers and is not consulted: the POVM is state independent.
    """
    if not observables:
        raise InvalidOperand("need at least one observable")
    p = observables[0].p
    dim = observables[0].op.dim
    for o in observables:
        if o.p != p or o.op.dim != dim:
            raise DimensionMismatch("observables must share order and dimension")
    povm = []
    k = len(observables)

    def build(prefix: list[int]):
        if len(prefix) == k:
            outer = np.eye(dim, dtype=np.complex128)
            for i in range(k - 1, 0, -1):
                outer = outer @ observables[i].projectors[prefix[i]]
            elem = outer @ observables[0].projectors[prefix[0]] @ outer.conj().T
            povm.append((tuple(prefix), elem))
            return
        for a in range(p):
            build(prefix + [a])

    build([])
    total = sum(mat for _, mat in povm)
    if not np.allclose(total, np.eye(dim), atol=ACCEPT_ATOL):
        raise InvalidOperand("refined POVM does not resolve the identity")
    return povm


# -- distances and rounding --


def state_dep_dist(a: DenseOp, b: DenseOp, psi: StateVec) -> float:
    """Squared state-dependent distance ||(A - B) (x) Id |psi>||^2,
    with A and B acting on the leading sites of psi."""
    if a.dim != b.dim:
        raise DimensionMismatch("operators differ in dimension")
    full = psi.vec.shape[0]
    if full % a.dim != 0:
        raise DimensionMismatch("operator does not cover a leading block of sites")
    work = psi.vec.reshape(a.dim, full // a.dim)
    diff = (a.mat - b.mat) @ work
    return float(np.linalg.norm(diff) ** 2)


def round_to_roots(b: DenseOp, s: int, psi: StateVec | None = None) -> DenseOp:
    """Unitary with b's eigenvectors and eigenvalues snapped to s-th roots of
    unity.  For normal b this satisfies
    ||(b - U) psi||^2 <= 4 ||(b^s - Id) psi||^2 for every state psi."""
    from scipy.linalg import schur

    mat = b.mat
    if not np.allclose(mat @ mat.conj().T, mat.conj().T @ mat, atol=CONSTRUCT_ATOL):
        raise NotNormal("root rounding needs a normal operator")
    t, v = schur(mat, output="complex")
    if not np.allclose(t, np.diag(np.diag(t)), atol=1e-8):
        raise NotNormal("Schur form is not diagonal; operator is not normal")
    eig = np.diag(t)
    snapped = np.empty_like(eig)
    for i, lam in enumerate(eig):
        if abs(lam) < 1e-14:
            snapped[i] = 1.0
        else:
            k = round(s * cmath.phase(lam) / (2 * math.pi))
            snapped[i] = cmath.exp(2j * math.pi * k / s)
    return DenseOp(v @ np.diag(snapped) @ v.conj().T, unitary=True)
