"""Minimum-cost planning and power re-tuning for full-duplex wireless
backhaul networks."""

from .errors import (DimensionMismatchError, GenerationError,
                     InfeasibleScenarioError, IntegralityError, PlanningError,
                     RetuneInfeasibleError, ScenarioFormatError,
                     SolverStalledError, TooManyBinariesError)
from .formulation import FormulationOptions
from .model import (CostWeights, Gains, Limits, Link, Node, Plan, PowerVector,
                    Scenario, Spectrum, Violation, capacity_matrix,
                    link_capacity, network_cost, self_interference_pairs,
                    sinr, validate_scenario)
from .planner import (IterationRecord, IterationTrace, PlanOptions,
                      diagnose_infeasibility, initial_point, plan)
from .retuner import RetuneOptions, retune
from .scenario_io import (GeneratorParams, generate_synthetic, parse_plan,
                          parse_scenario, write_plan, write_scenario)
from .solver import SolverOptions
from .validate import (ComparisonReport, FeasibilityReport, check_feasibility,
                       cross_check_small, hd_variant)

__version__ = "0.1.0"

__all__ = [
    "CostWeights", "ComparisonReport", "DimensionMismatchError",
    "FeasibilityReport", "FormulationOptions", "Gains", "GenerationError",
    "GeneratorParams", "InfeasibleScenarioError", "IntegralityError",
    "IterationRecord", "IterationTrace", "Limits", "Link", "Node", "Plan",
    "PlanOptions", "PlanningError", "PowerVector", "RetuneInfeasibleError",
    "RetuneOptions", "Scenario", "ScenarioFormatError", "SolverOptions",
    "SolverStalledError", "Spectrum", "TooManyBinariesError", "Violation",
    "capacity_matrix", "check_feasibility", "cross_check_small",
    "diagnose_infeasibility", "generate_synthetic", "hd_variant",
    "initial_point", "link_capacity", "network_cost", "parse_plan",
    "parse_scenario", "plan", "retune", "self_interference_pairs", "sinr",
    "validate_scenario", "write_plan", "write_scenario",
]
