"""Exception hierarchy.

Every error raised by the library derives from :class:`LBError`, which is a
``ValueError`` so that callers validating user input can catch it generically.
"""

from __future__ import annotations


class LBError(ValueError):
    """Base class for all library errors."""


# numerics
class MalformedProgram(LBError):
    pass


class NotConvex(LBError):
    pass


# experiment
class ExperimentError(LBError):
    """Raised when an experiment violates its invariants."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class RowSumError(ExperimentError):
    pass


class NegativeEntry(ExperimentError):
    pass


class EmptySignalSet(ExperimentError):
    pass


class ZeroMarginal(ExperimentError):
    pass


class ZeroBaseDensity(ExperimentError):
    pass


class StateMismatch(LBError):
    pass


class BadWeight(LBError):
    pass


class BadDichotomy(LBError):
    pass


class NotAPermutation(LBError):
    pass


class DimensionMismatch(LBError):
    pass


class DegenerateGrid(LBError):
    pass


# order checks
class DimensionLimitExceeded(LBError):
    pass


class TooManyStates(LBError):
    pass


class OneSignedWitness(LBError):
    pass


# decision problems
class BadBelief(LBError):
    pass


class NotQCC(LBError):
    pass


class NotBinary(LBError):
    pass


class NoMatch(LBError):
    pass


# moral hazard / screening
class DegenerateInput(LBError):
    pass


class EnumerationLimit(LBError):
    pass


class NoFeasibleMechanism(LBError):
    pass
