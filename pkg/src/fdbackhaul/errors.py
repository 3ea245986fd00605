"""Exception types shared across the package."""

from __future__ import annotations


class PlanningError(Exception):
    """Base class for all errors raised by this package."""


class ScenarioFormatError(PlanningError):
    """A scenario or plan document could not be parsed or failed validation."""


class GenerationError(PlanningError):
    """Synthetic scenario generation produced an unusable topology."""


class DimensionMismatchError(PlanningError):
    """Array shapes disagree with the scenario's link/subchannel counts."""


class IntegralityError(PlanningError):
    """A value that must be binary was too far from 0 or 1."""


class TooManyBinariesError(PlanningError):
    """The exhaustive reference solver refuses instances this large."""


class InfeasibleScenarioError(PlanningError):
    """No plan can satisfy the demands, with a short diagnosis attached."""

    def __init__(self, message: str, diagnosis: str = ""):
        super().__init__(message)
        self.diagnosis = diagnosis


class RetuneInfeasibleError(PlanningError):
    """Power re-tuning cannot restore feasibility on the fixed topology."""


class SolverStalledError(PlanningError):
    """The simplex engine hit its iteration cap without converging."""
