"""
═══════════════════════════════════════════════════════════════════════════════
FILE: tandem_errors.py
DESCRIPTION: Exception hierarchy shared by the toolkit and the command router
═══════════════════════════════════════════════════════════════════════════════
"""

from typing import Any, Optional


class TandemError(Exception):
    """Base class for every error raised by the toolkit."""

    exit_code = 1


class ConfigValidationError(TandemError, ValueError):
    """Invalid instance document, option or parameter. Names the offending field."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionError(ConfigValidationError):
    """State or co-state vector whose length differs from J."""

    def __init__(self, expected: int, got: int, field: str = "x"):
        self.expected = expected
        self.got = got
        super().__init__(field, f"expected length {expected}, got {got}")


class DomainError(TandemError, ValueError):
    """Point outside the domain an operation requires."""

    exit_code = 2


class PreconditionError(TandemError):
    """Stated precondition of an operation does not hold."""

    exit_code = 3


class VerificationError(TandemError):
    """A numerical assertion failed (residual, identity, viscosity inequality)."""

    exit_code = 3

    def __init__(self, message: str, detail: Optional[Any] = None):
        self.detail = detail
        super().__init__(message)


class IterationLimitError(TandemError):
    """Value iteration stopped at the iteration bound before converging."""

    exit_code = 4

    def __init__(self, iterations: int, final_delta: float, partial: Optional[Any] = None):
        self.iterations = iterations
        self.final_delta = final_delta
        self.partial = partial
        super().__init__(
            f"no convergence after {iterations} iterations (final delta {final_delta:.3e})"
        )
