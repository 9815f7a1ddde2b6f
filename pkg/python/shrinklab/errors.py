"""
Exception hierarchy for shrinklab.

Every error derives from :class:`ShrinkLabError` and carries the process exit
code the command-line runner reports for it.
"""

from __future__ import annotations

from typing import Sequence


class ShrinkLabError(Exception):
    """Base class for all shrinklab errors."""

    exit_code = 1


class ConfigError(ShrinkLabError):
    """Invalid experiment configuration or malformed parameters."""

    exit_code = 1

    def __init__(self, message: str, violations: Sequence[str] = ()) -> None:
        super().__init__(message)
        self.violations = list(violations)


class VerificationError(ShrinkLabError):
    """An inequality in a verification chain does not hold."""

    exit_code = 2

    def __init__(self, check: str, message: str) -> None:
        super().__init__(f"[{check}] {message}")
        self.check = check


class CertificateError(ShrinkLabError):
    """A certificate is missing, has the wrong decay tag, or fails re-verification."""

    exit_code = 2


class HypothesisError(ShrinkLabError):
    """A covering instance violates the lemma's hypothesis."""

    exit_code = 2


class FalsificationError(ShrinkLabError):
    """A lemma campaign produced an instance where neither alternative holds."""

    exit_code = 2


class PrecisionError(ShrinkLabError):
    """An interval comparison cannot be decided at the working precision."""

    exit_code = 3


class RationalInputError(ShrinkLabError):
    """Continued fraction expansion terminated before the requested length."""

    exit_code = 1

    def __init__(self, message: str, integer_part: int, quotients: Sequence[int]) -> None:
        super().__init__(message)
        self.integer_part = integer_part
        self.quotients = list(quotients)


class BudgetError(ShrinkLabError):
    """A search, orbit or grid exceeds its configured budget."""

    exit_code = 3


class ResolutionError(ShrinkLabError):
    """Grid error bounds cannot separate a decision within the budget."""

    exit_code = 3


class IntegrationError(ShrinkLabError):
    """Step-size underflow or failed section crossing in the flow integrator."""

    exit_code = 3


class NonMonotoneError(ShrinkLabError):
    """A schedule required to be non-increasing is not."""

    exit_code = 1


class EpsilonZeroError(ShrinkLabError):
    """The disjointness constant vanishes at the requested horizon."""

    exit_code = 1
