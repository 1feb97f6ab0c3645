"""Cost-optimal on/off switching plans for chains of network functions.

A chain receives a constant request rate. Each function keeps enough machines
permanently on to cover the integer part of its load and cycles one extra
machine to absorb the rest. Two designers choose the cycle periods, and an
exact fluid simulator checks the resulting queues, delay and cost.
"""

__version__ = "0.1.0"

from .model import (ChainSpec, CostBreakdown, FunctionProfile, FunctionSpec,
                    derive_profile, derive_profiles, lower_bound_cost,
                    periodic_compute_cost, queue_cost, split_rate, reference_chain)
from .linear import LinearSolution, solve as solve_linear
from .period import PeriodDesign, optimize as optimize_period, cost_of_period
from .schedule import (COMMON_PERIOD, LINEAR, DisturbanceEvent, DisturbanceResponse,
                       FunctionSchedule, SwitchingPlan, UnrecoverableDisturbance, build,
                       disturbance_response, plan_for_period)
from .fluid import (SimulationConfig, SimulationDivergence, SimulationTrace,
                    measure_cost, measure_e2e_delay, simulate)

__all__ = [
    "ChainSpec", "CostBreakdown", "FunctionProfile", "FunctionSpec", "derive_profile",
    "derive_profiles", "lower_bound_cost", "periodic_compute_cost", "queue_cost",
    "split_rate", "reference_chain", "LinearSolution", "solve_linear", "PeriodDesign",
    "optimize_period", "cost_of_period", "COMMON_PERIOD", "LINEAR", "DisturbanceEvent",
    "DisturbanceResponse", "FunctionSchedule", "SwitchingPlan", "UnrecoverableDisturbance",
    "build", "disturbance_response", "plan_for_period", "SimulationConfig",
    "SimulationDivergence", "SimulationTrace", "measure_cost", "measure_e2e_delay",
    "simulate", "plan_chain",
]


def plan_chain(spec: ChainSpec, method: str = COMMON_PERIOD) -> SwitchingPlan:
    """Design a plan for ``spec`` with the named method."""
    if method == LINEAR:
        return build(spec, solve_linear(spec))
    if method == COMMON_PERIOD:
        return build(spec, optimize_period(spec))
    raise ValueError(f"unknown method {method!r}")
