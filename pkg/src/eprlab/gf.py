"""Exact arithmetic in GF(p^t): canonical moduli, traces, self-dual bases.

Elements live in the power basis of a fixed irreducible modulus.  The code of
an element is the integer sum_i d_i * p^i where d_i is the coefficient of x^i
(low power first); codes 0..p-1 are exactly the prime subfield.  A self-dual
basis, when one exists, is a coordinate layer on top of the power basis: the
qupit decomposition of a qudit needs both views.

Multiplication runs through exp/log tables built once per FieldSpec from a
deterministically chosen primitive element, so all operations are exact table
lookups after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator, Sequence

from .errors import (
    DimensionCap,
    InvalidOperand,
    LengthMismatch,
    NoSelfDualBasis,
    SearchExhausted,
    SpecMismatch,
)

MAX_Q = 1 << 16
MAX_SELF_DUAL_T = 6

# Canonical irreducible moduli, digits low power first (monic, degree t).
# Constructor re-verifies irreducibility, so a bad entry cannot ship silently.
CANONICAL_MODULI: dict[tuple[int, int], tuple[int, ...]] = {
    (2, 1): (0, 1),
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 5): (1, 0, 1, 0, 0, 1),
    (2, 6): (1, 1, 0, 0, 0, 0, 1),
    (3, 1): (0, 1),
    (3, 2): (1, 0, 1),
    (3, 3): (1, 2, 0, 1),
    (3, 4): (2, 1, 0, 0, 1),
    (3, 5): (1, 2, 0, 0, 0, 1),
    (3, 6): (2, 1, 0, 0, 0, 0, 1),
}


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


def _prime_factors(n: int) -> list[int]:
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _poly_mul_mod(a: Sequence[int], b: Sequence[int], modulus: Sequence[int], p: int) -> list[int]:
    """Multiply two Z_p coefficient lists and reduce by the monic modulus."""
    t = len(modulus) - 1
    prod = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai == 0:
            continue
        for j, bj in enumerate(b):
            prod[i + j] = (prod[i + j] + ai * bj) % p
    # Monic reduction: subtract x^(k-t) * modulus to kill the leading term.
    for k in range(len(prod) - 1, t - 1, -1):
        c = prod[k]
        if c:
            prod[k] = 0
            for j in range(t):
                prod[k - t + j] = (prod[k - t + j] - c * modulus[j]) % p
    prod = prod[:t]
    prod += [0] * (t - len(prod))
    return prod


def _poly_divides(div: Sequence[int], poly: Sequence[int], p: int) -> bool:
    """Whether the monic polynomial div divides poly over Z_p."""
    rem = list(poly)
    dd = len(div) - 1
    while len(rem) - 1 >= dd:
        lead = rem[-1]
        if lead:
            shift = len(rem) - 1 - dd
            for j in range(dd + 1):
                rem[shift + j] = (rem[shift + j] - lead * div[j]) % p
        rem.pop()
    return all(c == 0 for c in rem)


def _monic_polys(degree: int, p: int) -> Iterator[list[int]]:
    for code in range(p**degree):
        digits = []
        c = code
        for _ in range(degree):
            digits.append(c % p)
            c //= p
        yield digits + [1]


class FieldSpec:
    """GF(p^t) with a fixed irreducible modulus; all arithmetic tables live here.

    Instances are immutable after construction and safe to share.  Equality is
    by (p, t, modulus).
    """

    def __init__(self, p: int, t: int, modulus: Sequence[int] | None = None):
        if not _is_prime(p):
            raise InvalidOperand(f"p = {p} is not prime")
        if t < 1:
            raise InvalidOperand(f"t must be positive, got {t}")
        q = p**t
        if q > MAX_Q:
            raise DimensionCap(f"q = {q} exceeds the desk-scale cap {MAX_Q}")
        if modulus is None:
            try:
                modulus = CANONICAL_MODULI[(p, t)]
            except KeyError:
                raise InvalidOperand(
                    f"no canonical modulus for (p={p}, t={t}); pass one explicitly"
                ) from None
        modulus = tuple(int(c) % p for c in modulus)
        if len(modulus) != t + 1 or modulus[t] != 1:
            raise InvalidOperand("modulus must be monic of degree t")
        if t > 8:
            raise InvalidOperand("irreducibility check capped at t <= 8")
        for deg in range(1, t // 2 + 1):
            for cand in _monic_polys(deg, p):
                if _poly_divides(cand, modulus, p):
                    raise InvalidOperand(
                        f"modulus {list(modulus)} is divisible by {cand} over Z_{p}"
                    )
        if t > 1 and modulus[0] == 0:
            raise InvalidOperand("modulus with zero constant term has root 0")

        self.p = p
        self.t = t
        self.q = q
        self.modulus = modulus
        self._digits = [self._code_digits(c) for c in range(q)]
        self._build_log_tables()
        self._trace = [self._trace_by_powers(c) for c in range(q)]
        self._zero = FieldElement(self, 0)
        self._one = FieldElement(self, 1)

    def _code_digits(self, code: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.t):
            out.append(code % self.p)
            code //= self.p
        return tuple(out)

    def _digits_code(self, digits: Sequence[int]) -> int:
        code = 0
        for d in reversed(digits):
            code = code * self.p + (d % self.p)
            # noqa: digits beyond t are the caller's bug; length is checked upstream
        return code

    def _mul_raw(self, a: int, b: int) -> int:
        prod = _poly_mul_mod(self._digits[a], self._digits[b], self.modulus, self.p)
        return self._digits_code(prod)

    def _build_log_tables(self) -> None:
        order = self.q - 1
        factors = _prime_factors(order) if order > 1 else []
        gen = None
        for cand in range(1, self.q):
            ok = True
            for f in factors:
                if self._pow_raw(cand, order // f) == 1:
                    ok = False
                    break
            if ok:
                gen = cand
                break
        assert gen is not None
        exp = [1] * max(order, 1)
        acc = 1
        for i in range(1, order):
            acc = self._mul_raw(acc, gen)
            exp[i] = acc
        log = [0] * self.q
        for i, c in enumerate(exp):
            log[c] = i
        self._exp = exp
        self._log = log
        self.generator_code = gen

    def _pow_raw(self, base: int, n: int) -> int:
        acc = 1
        cur = base
        while n:
            if n & 1:
                acc = self._mul_raw(acc, cur)
            cur = self._mul_raw(cur, cur)
            n >>= 1
        return acc

    def _trace_by_powers(self, code: int) -> int:
        # tr(a) = sum over l of a^(p^l); the result is a constant polynomial.
        acc = 0
        cur = code
        for _ in range(self.t):
            acc = self.add_code(acc, cur)
            cur = self._pow_raw(cur, self.p)
        digits = self._digits[acc]
        assert all(d == 0 for d in digits[1:]), "trace left the prime subfield"
        return digits[0]

    # -- code-level fast path (used by the simulator's table builders) --

    def add_code(self, a: int, b: int) -> int:
        if self.p == 2:
            return a ^ b
        da, db = self._digits[a], self._digits[b]
        code = 0
        for i in reversed(range(self.t)):
            code = code * self.p + (da[i] + db[i]) % self.p
        return code

    def neg_code(self, a: int) -> int:
        if self.p == 2:
            return a
        da = self._digits[a]
        code = 0
        for i in reversed(range(self.t)):
            code = code * self.p + (-da[i]) % self.p
        return code

    def sub_code(self, a: int, b: int) -> int:
        return self.add_code(a, self.neg_code(b))

    def mul_code(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[(self._log[a] + self._log[b]) % (self.q - 1)]

    def inv_code(self, a: int) -> int:
        if a == 0:
            raise InvalidOperand("zero has no inverse")
        return self._exp[(-self._log[a]) % (self.q - 1)]

    def pow_code(self, a: int, n: int) -> int:
        if a == 0:
            if n == 0:
                return 1
            if n < 0:
                raise InvalidOperand("zero to a negative power")
            return 0
        return self._exp[(self._log[a] * n) % (self.q - 1)]

    def trace_code(self, a: int) -> int:
        return self._trace[a]

    # -- element-level API --

    def el(self, code: int) -> FieldElement:
        """Element with the given code in [0, q)."""
        if not 0 <= code < self.q:
            raise InvalidOperand(f"code {code} outside [0, {self.q})")
        return FieldElement(self, code)

    def lift(self, n: int) -> FieldElement:
        """Embed the integer n via the prime subfield (n mod p)."""
        return FieldElement(self, n % self.p)

    def from_digits(self, digits: Sequence[int]) -> FieldElement:
        if len(digits) != self.t:
            raise LengthMismatch(f"expected {self.t} digits, got {len(digits)}")
        return FieldElement(self, self._digits_code(digits))

    @property
    def zero(self) -> FieldElement:
        return self._zero

    @property
    def one(self) -> FieldElement:
        return self._one

    def elements(self) -> Iterator[FieldElement]:
        for c in range(self.q):
            yield FieldElement(self, c)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldSpec):
            return NotImplemented
        return (self.p, self.t, self.modulus) == (other.p, other.t, other.modulus)

    def __hash__(self) -> int:
        return hash((self.p, self.t, self.modulus))

    def __repr__(self) -> str:
        return f"FieldSpec(p={self.p}, t={self.t}, modulus={list(self.modulus)})"

    def to_json(self) -> dict:
        return {"p": self.p, "t": self.t, "modulus": list(self.modulus)}

    @staticmethod
    def from_json(obj: dict) -> FieldSpec:
        return field(int(obj["p"]), int(obj["t"]), tuple(obj["modulus"]))


@lru_cache(maxsize=None)
def field(p: int, t: int, modulus: tuple[int, ...] | None = None) -> FieldSpec:
    """Shared FieldSpec for (p, t), canonical modulus unless one is given."""
    return FieldSpec(p, t, modulus)


@dataclass(frozen=True)
class FieldElement:
    """An element of GF(p^t), identified by its power-basis code."""

    spec: FieldSpec
    code: int

    def _check(self, other: FieldElement) -> None:
        if self.spec != other.spec:
            raise SpecMismatch(f"{self.spec} vs {other.spec}")

    def _coerce(self, other: FieldElement | int) -> FieldElement:
        if isinstance(other, int):
            return self.spec.lift(other)
        self._check(other)
        return other

    @property
    def digits(self) -> tuple[int, ...]:
        return self.spec._digits[self.code]

    def __add__(self, other: FieldElement | int) -> FieldElement:
        o = self._coerce(other)
        return FieldElement(self.spec, self.spec.add_code(self.code, o.code))

    __radd__ = __add__

    def __neg__(self) -> FieldElement:
        return FieldElement(self.spec, self.spec.neg_code(self.code))

    def __sub__(self, other: FieldElement | int) -> FieldElement:
        o = self._coerce(other)
        return FieldElement(self.spec, self.spec.sub_code(self.code, o.code))

    def __rsub__(self, other: int) -> FieldElement:
        return self.spec.lift(other) - self

    def __mul__(self, other: FieldElement | int) -> FieldElement:
        o = self._coerce(other)
        return FieldElement(self.spec, self.spec.mul_code(self.code, o.code))

    __rmul__ = __mul__

    def inverse(self) -> FieldElement:
        return FieldElement(self.spec, self.spec.inv_code(self.code))

    def __truediv__(self, other: FieldElement | int) -> FieldElement:
        return self * self._coerce(other).inverse()

    def __pow__(self, n: int) -> FieldElement:
        return FieldElement(self.spec, self.spec.pow_code(self.code, n))

    def trace(self) -> int:
        """Field trace down to Z_p, returned as an int in [0, p)."""
        return self.spec.trace_code(self.code)

    def __bool__(self) -> bool:
        return self.code != 0

    def __repr__(self) -> str:
        return f"F{self.spec.q}({self.code})"


@dataclass(frozen=True)
class SelfDualBasis:
    """A basis (b_1, ..., b_t) with tr(b_i b_j) = delta_ij."""

    basis: tuple[FieldElement, ...]

    @property
    def spec(self) -> FieldSpec:
        return self.basis[0].spec

    def coords(self, a: FieldElement) -> tuple[int, ...]:
        """Z_p coordinates of a along the basis: coords(a)_l = tr(a * b_l)."""
        return tuple((a * b).trace() for b in self.basis)

    def uncoords(self, cs: Sequence[int]) -> FieldElement:
        """Inverse of coords: sum_l cs_l * b_l."""
        if len(cs) != len(self.basis):
            raise LengthMismatch(f"expected {len(self.basis)} coordinates")
        acc = self.spec.zero
        for c, b in zip(cs, self.basis):
            acc = acc + self.spec.lift(c) * b
        return acc


def self_dual_basis(spec: FieldSpec) -> SelfDualBasis:
    """Deterministic self-dual basis for GF(p^t).

    Exists iff q is even or p and t are both odd; found by backtracking over
    element codes in increasing order, so the result is reproducible.  GF(4)
    yields (w, w^2) where w is the class of x.
    """
    even_q = spec.p == 2
    if not (even_q or (spec.p % 2 == 1 and spec.t % 2 == 1)):
        raise NoSelfDualBasis(
            f"GF({spec.q}) has no self-dual basis (q odd with t even)"
        )
    if spec.t > MAX_SELF_DUAL_T:
        raise SearchExhausted(f"self-dual search capped at t <= {MAX_SELF_DUAL_T}")

    t = spec.t
    chosen: list[int] = []

    def admissible(c: int) -> bool:
        if spec.trace_code(spec.mul_code(c, c)) != 1:
            return False
        return all(
            spec.trace_code(spec.mul_code(c, b)) == 0 for b in chosen
        )

    def extend() -> bool:
        if len(chosen) == t:
            return True
        start = chosen[-1] + 1 if chosen else 1
        # Basis candidates explored in code order; chosen codes kept increasing,
        # which is safe since the Gram conditions are symmetric.
        for c in range(start, spec.q):
            if admissible(c):
                chosen.append(c)
                if extend():
                    return True
                chosen.pop()
        return False

    if not extend():
        raise SearchExhausted(f"no self-dual basis found for GF({spec.q})")
    basis = tuple(FieldElement(spec, c) for c in chosen)
    # Full Gram check: the search invariant guarantees it, assert anyway.
    for i, bi in enumerate(basis):
        for j, bj in enumerate(basis):
            assert (bi * bj).trace() == (1 if i == j else 0)
    return SelfDualBasis(basis)


# -- vectors over GF(q) --


def vec_dot(u: Sequence[FieldElement], v: Sequence[FieldElement]) -> FieldElement:
    """Bilinear dot product sum_i u_i v_i."""
    if len(u) != len(v):
        raise LengthMismatch(f"{len(u)} vs {len(v)}")
    if not u:
        raise InvalidOperand("empty vectors have no spec to produce zero in")
    acc = u[0].spec.zero
    for a, b in zip(u, v):
        acc = acc + a * b
    return acc


def tr_dot(u: Sequence[FieldElement], v: Sequence[FieldElement]) -> int:
    """Trace of the dot product, as an int in [0, p)."""
    return vec_dot(u, v).trace()


def vec_add(u: Sequence[FieldElement], v: Sequence[FieldElement]) -> tuple[FieldElement, ...]:
    if len(u) != len(v):
        raise LengthMismatch(f"{len(u)} vs {len(v)}")
    return tuple(a + b for a, b in zip(u, v))


def vec_scale(c: FieldElement, u: Sequence[FieldElement]) -> tuple[FieldElement, ...]:
    return tuple(c * a for a in u)


def vec_neg(u: Sequence[FieldElement]) -> tuple[FieldElement, ...]:
    return tuple(-a for a in u)


# -- small dense linear algebra over GF(q) --
#
# Matrices are lists of row tuples of FieldElement.  Sizes here are desk scale
# (k <= 7 codes, m <= 4 question spaces), so clarity beats vectorization.


def mat_rref(rows: Sequence[Sequence[FieldElement]]) -> list[tuple[FieldElement, ...]]:
    """Reduced row-echelon form; returns only the nonzero rows."""
    work = [list(r) for r in rows]
    if not work:
        return []
    ncols = len(work[0])
    pivot_row = 0
    for col in range(ncols):
        pivot = next(
            (r for r in range(pivot_row, len(work)) if work[r][col]), None
        )
        if pivot is None:
            continue
        work[pivot_row], work[pivot] = work[pivot], work[pivot_row]
        inv = work[pivot_row][col].inverse()
        work[pivot_row] = [inv * x for x in work[pivot_row]]
        for r in range(len(work)):
            if r != pivot_row and work[r][col]:
                c = work[r][col]
                work[r] = [x - c * y for x, y in zip(work[r], work[pivot_row])]
        pivot_row += 1
        if pivot_row == len(work):
            break
    return [tuple(r) for r in work[:pivot_row] if any(r)]


def mat_rank(rows: Sequence[Sequence[FieldElement]]) -> int:
    return len(mat_rref(rows))


def mat_nullspace(rows: Sequence[Sequence[FieldElement]]) -> list[tuple[FieldElement, ...]]:
    """Basis of {v : R v = 0} for the row list R."""
    if not rows:
        raise InvalidOperand("nullspace of an empty matrix is ambiguous")
    spec = rows[0][0].spec
    ncols = len(rows[0])
    red = mat_rref(rows)
    pivots = []
    for r in red:
        pivots.append(next(i for i, x in enumerate(r) if x))
    free = [i for i in range(ncols) if i not in pivots]
    basis = []
    for f in free:
        v = [spec.zero] * ncols
        v[f] = spec.one
        for r, pc in zip(red, pivots):
            v[pc] = -r[f]
        basis.append(tuple(v))
    return basis


def mat_solve(
    rows: Sequence[Sequence[FieldElement]], rhs: Sequence[FieldElement]
) -> tuple[FieldElement, ...] | None:
    """One solution of R x = rhs, or None if the system is inconsistent."""
    if len(rows) != len(rhs):
        raise LengthMismatch(f"{len(rows)} rows vs {len(rhs)} rhs entries")
    spec = rhs[0].spec
    ncols = len(rows[0])
    aug = [list(r) + [b] for r, b in zip(rows, rhs)]
    red = mat_rref(aug)
    x = [spec.zero] * ncols
    for r in red:
        lead = next(i for i, v in enumerate(r) if v)
        if lead == ncols:
            return None
        x[lead] = r[ncols]
    return tuple(x)


def span_iter(
    basis: Sequence[Sequence[FieldElement]],
) -> Iterator[tuple[FieldElement, ...]]:
    """All vectors in the row span of the given (independent or not) rows."""
    rows = mat_rref(basis)
    if not rows:
        if basis and basis[0]:
            spec = basis[0][0].spec
            yield tuple(spec.zero for _ in basis[0])
        return
    spec = rows[0][0].spec
    n = len(rows[0])
    for combo_code in range(spec.q ** len(rows)):
        acc = [spec.zero] * n
        c = combo_code
        for row in rows:
            coeff = spec.el(c % spec.q)
            c //= spec.q
            if coeff:
                acc = [a + coeff * x for a, x in zip(acc, row)]
        yield tuple(acc)
