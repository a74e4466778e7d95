"""Error taxonomy shared across the package."""

from __future__ import annotations


class QdsourceError(Exception):
    """Base class for package errors."""


class DomainError(QdsourceError, ValueError):
    """Input outside the mathematical domain (negative frequency, ...)."""


class QuadratureError(QdsourceError, RuntimeError):
    """An adaptive quadrature failed to reach its tolerance.

    Carries the residual estimate so callers can report it.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConfigurationError(QdsourceError, ValueError):
    """Invalid or inconsistent configuration (bad key, short grid, ...)."""


class ConstructionError(QdsourceError, RuntimeError):
    """A generator or decomposition violates a structural requirement."""


class DivergentTransformError(QdsourceError, RuntimeError):
    """A Laplace transform does not converge (non-decaying mode)."""


class ToleranceError(QdsourceError, RuntimeError):
    """A numerical result missed its accuracy target."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class UndefinedEfficiencyError(QdsourceError, ZeroDivisionError):
    """Total emitted power is zero; the efficiency ratio is undefined."""
