"""Exception hierarchy shared across the package.

Validation problems (bad dimensions, broken invariants, malformed files)
derive from ValueError so they behave naturally in library use; numerical
failures (infeasible LP, non-converged eigensolve) get their own branch so
the CLI can map them to a distinct exit code.
"""


class QmlchaError(Exception):
    """Base class for all package-specific errors."""


class InvalidDimensionError(QmlchaError, ValueError):
    """A Hilbert-space dimension is out of range (e.g. n < 2)."""


class InvariantViolationError(QmlchaError, ValueError):
    """An object failed its construction-time invariants."""


class DimensionMismatchError(QmlchaError, ValueError):
    """Two objects with incompatible dimensions were combined."""


class KindMismatchError(QmlchaError, TypeError):
    """Operands of incompatible kinds (e.g. ket with density matrix)."""


class CriterionInsufficientError(QmlchaError, ValueError):
    """A labeling criterion was requested outside its validity region."""


class MissingAlphaError(QmlchaError, ValueError):
    """A dataset lacks the hull-distance feature required by the caller."""


class NumericalError(QmlchaError, RuntimeError):
    """Base class for solver failures (CLI exit code 3)."""


class LpInfeasibleError(NumericalError):
    """The hull-membership linear program has no feasible point."""


class EigensolverError(NumericalError):
    """An eigensolver failed to converge or returned inconsistent results."""


class SizeLimitError(QmlchaError, ValueError):
    """A requested problem size exceeds what the chosen method can handle."""


class FormatError(QmlchaError, ValueError):
    """A data file does not conform to the QSDS/QHUL/model layout."""
