"""
Exception hierarchy for the lab.

Every error subclasses the builtin it refines, so callers can catch either the
lab type or the plain ValueError / RuntimeError.
"""

from __future__ import annotations


class LabError(Exception):
    """Base class for all lab errors."""


class DimensionMismatchError(LabError, ValueError):
    """Operands live in different ambient dimensions or qubit counts."""


class CapExceededError(LabError, ValueError):
    """A configured resource cap (enumeration, statevector, eigensolver) was hit."""

    def __init__(self, what: str, requested: int, cap: int) -> None:
        self.what = what
        self.requested = requested
        self.cap = cap
        super().__init__(f"{what} of {requested} exceeds cap {cap}")


class ConvergenceError(LabError, RuntimeError):
    """An iterative solver ran out of budget without meeting its tolerance."""


class PreconditionError(LabError, ValueError):
    """An operation was called outside its contract."""


class QueryBudgetError(LabError, RuntimeError):
    """A strategy tried to query an oracle beyond its budget."""


class StageError(LabError, RuntimeError):
    """A pipeline stage failed; `stage` names the transformation."""

    def __init__(self, stage: str, cause: Exception) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


class InvalidWitnessError(LabError, ValueError):
    """The NP relation rejected the supplied witness."""


class TranscriptError(LabError, ValueError):
    """A setup transcript is malformed or does not bind the statement."""


class ConfigError(LabError, ValueError):
    """An experiment configuration failed validation."""


class ReportError(LabError, RuntimeError):
    """Result files are missing or unreadable."""
