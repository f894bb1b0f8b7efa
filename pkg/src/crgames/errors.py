"""Exception types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass


class GameSolverError(Exception):
    """Base class for all domain errors raised by this package."""


@dataclass(frozen=True)
class Violation:
    """A single validation failure, naming the offending entity."""

    code: str  # DistributionNotNormalized | TargetNotSink | UnknownIdentifier
    entity: str
    message: str

    def __str__(self) -> str:
        return f"{self.code}({self.entity}): {self.message}"


class GameValidationError(GameSolverError):
    """Raised when a parsed game description violates the model invariants."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class DimensionMismatch(GameSolverError):
    pass


class SolverDidNotConverge(GameSolverError):
    """Linear-programming pivot cap hit; carries residual diagnostics."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class CapExceeded(GameSolverError):
    """Instance too large for an exhaustive enumeration."""


class ValuesNotConverged(GameSolverError):
    """Classification refused to run on an iteration-capped value vector."""


class DegenerateGap(GameSolverError):
    """Optimal-action gap too thin to separate from the tolerance floor."""


class ConstructionFailed(GameSolverError):
    """The increasing-valuation construction failed its verification step."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class SingularSystem(GameSolverError):
    """Degenerate Markov chain encountered during exact evaluation."""

    def __init__(self, message, states=None):
        super().__init__(message)
        self.states = tuple(states or ())
