"""Exception types shared across the laboratory.

Every error raised by library code (as opposed to plain bugs) is a subclass of
EprLabError, so callers can catch one root type at a protocol boundary.
"""


class EprLabError(Exception):
    """Root of the library's exception hierarchy."""


class InvalidOperand(EprLabError):
    """Arithmetic on a value outside the operation's domain (e.g. inverting zero)."""


class SpecMismatch(EprLabError):
    """Two operands belong to different field specs."""


class NoSelfDualBasis(EprLabError):
    """The field admits no self-dual basis (q odd with t even)."""


class SearchExhausted(EprLabError):
    """A bounded deterministic search ran out of budget."""


class LengthMismatch(EprLabError):
    """Vectors of unequal length where equal length is required."""


class DimensionMismatch(EprLabError):
    """Operator/state shape disagreement, or points of the wrong arity."""


class TooManyPoints(EprLabError):
    """More interpolation points than the curve degree budget allows."""


class ZeroPolynomial(EprLabError):
    """An operation needing a nonzero polynomial received the zero polynomial."""


class DimensionCap(EprLabError):
    """A dense object would exceed the desk-scale size caps."""


class NotNormal(EprLabError):
    """Operator expected to be normal (commute with its adjoint) is not."""


class BudgetExceeded(EprLabError):
    """Exact enumeration would exceed the configured outcome/term budget."""


class UnsupportedPrime(EprLabError):
    """A game construction only implemented for p = 2 was asked for p > 2."""


class NotSelfDual(EprLabError):
    """Generator matrix fails the weak self-duality condition."""


class RankDeficient(EprLabError):
    """Generator matrix columns are linearly dependent."""


class NoLogicalQudit(EprLabError):
    """The code encodes zero logical qudits but a logical operator was requested."""


class FormatMismatch(EprLabError):
    """A serialized artifact does not parse under the declared format."""


class HasYTerm(EprLabError):
    """A Hamiltonian term mixes X and Z on the same site where that is forbidden."""
