"""Exception hierarchy.

Validation problems (bad input, bad configuration) and numerical failures are
kept apart so the command line can map them to different exit codes.
"""


class NldidError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(NldidError, ValueError):
    """Input or configuration is invalid."""


class DomainError(ValidationError):
    """Argument outside the domain of a numeric function."""


class ConfigurationError(ValidationError):
    """Inconsistent options (overlapping windows, unknown preset, ...)."""


class SchemaError(ValidationError):
    """Input file does not follow the documented schema."""


class EmptyResultError(NldidError):
    """A filter or subgroup selected nothing, so the statistic is undefined."""


class NumericalError(NldidError, ArithmeticError):
    """Numerical failure during estimation."""


class SingularMatrixError(NumericalError):
    """Cholesky factorisation met a non-positive pivot."""

    def __init__(self, message, pivot):
        super().__init__(message)
        self.pivot = pivot


class RankDeficiencyError(SingularMatrixError):
    """Design matrix lacks full column rank."""

    def __init__(self, message, pivot, column):
        super().__init__(message, pivot)
        self.column = column


class DegenerateOutcomeError(NumericalError):
    """Outcome has no variation; the likelihood has no interior maximum."""


class NotConvergedError(NumericalError):
    """An operation needs a converged fit but got one that did not converge."""
