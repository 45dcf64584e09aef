"""
Exception hierarchy for lawline.

Every error derives from LawlineError and from the closest builtin, so callers
can catch either. The command line maps UsageError to exit code 3 and every other
LawlineError to exit code 2.
"""

from typing import Iterable


class LawlineError(Exception):
    """Base class for domain and fit errors."""


class InvalidArgumentError(LawlineError, ValueError):
    """An argument is outside its domain (zero byte count, empty interval, ...)."""


class UsageError(InvalidArgumentError):
    """Command-line flags are missing, contradictory or match nothing."""


class MissingDataError(LawlineError, ValueError):
    """Requested dataset labels are absent from the records."""

    def __init__(self, missing: Iterable[str], context: str = ""):
        self.missing = sorted(set(missing))
        where = f" in {context}" if context else ""
        super().__init__(f"Missing dataset(s){where}: {', '.join(self.missing)}")


class EmptyInputError(LawlineError, ValueError):
    """An input file produced no valid records."""

    def __init__(self, message: str, diagnostics: Iterable = ()):
        self.diagnostics = list(diagnostics)
        super().__init__(message)


class UnderdeterminedError(LawlineError, ValueError):
    """Too few data points for the number of parameters."""


class InsufficientVariationError(UnderdeterminedError):
    """
    All records share one N or one D, so the compute-to-loss law cannot be fitted.

    Callers fall back to the minimum observed loss as the irreducible error.
    """


class ConvergenceError(LawlineError, RuntimeError):
    """Every start produced non-finite residuals."""


class UnitMismatchError(LawlineError, ValueError):
    """Losses or laws in different units were combined."""


class InvalidCompositionError(LawlineError, ValueError):
    """A compute-to-loss law and a loss-to-loss law cannot be chained."""
