"""
Error Types

Exception hierarchy shared by the numerics, the workflow and the CLI.
The CLI maps each family onto an exit code.
"""

from typing import Optional


class HaffsimError(Exception):
    """Base class for all haffsim failures."""

    kind = "internal"
    exit_code = 3


class ConfigError(HaffsimError, ValueError):
    """Invalid parameters, unknown or duplicate keys, type mismatches."""

    kind = "config"
    exit_code = 2


class NumericalError(HaffsimError, ArithmeticError):
    """A numerical procedure could not reach its target accuracy."""

    kind = "numerical"
    exit_code = 3


class QuadratureError(NumericalError):
    """Quadrature did not converge; carries the error estimate it did reach."""

    def __init__(self, message: str, achieved_error: Optional[float] = None):
        super().__init__(message)
        self.achieved_error = achieved_error


class IntegrationError(NumericalError):
    """ODE integration failed (typically step-size underflow)."""


class FitError(NumericalError):
    """Not enough usable points to fit a power law."""


class MissingMomentError(HaffsimError, KeyError):
    """A moment order needed by a formula is not stored."""

    kind = "numerical"
    exit_code = 3

    def __init__(self, order: float):
        super().__init__(order)
        self.order = order

    def __str__(self) -> str:
        return f"moment of order {self.order:g} is not available"
