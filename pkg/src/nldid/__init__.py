"""Nonlinear difference-in-differences estimation for household education panels."""

from .errors import (
    ConfigurationError,
    DegenerateOutcomeError,
    DomainError,
    EmptyResultError,
    NldidError,
    NotConvergedError,
    NumericalError,
    RankDeficiencyError,
    SchemaError,
    SingularMatrixError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DegenerateOutcomeError",
    "DomainError",
    "EmptyResultError",
    "NldidError",
    "NotConvergedError",
    "NumericalError",
    "RankDeficiencyError",
    "SchemaError",
    "SingularMatrixError",
    "ValidationError",
]
