"""Executable switching schedules built from either designer's output."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

from .linear import LinearSolution
from .model import ChainSpec, CostBreakdown, derive_profiles
from .period import PeriodDesign, onset_gaps

LINEAR = "linear"
COMMON_PERIOD = "common-period"
METHODS = (LINEAR, COMMON_PERIOD)


class UnrecoverableDisturbance(ValueError):
    """The extra machine has no off-time in which to absorb extra work."""


@dataclass(frozen=True)
class FunctionSchedule:
    """Switching pattern of one function's extra machine.

    The extra machine serves during ``[onset + j*period, onset + j*period +
    on_duration)`` for every integer ``j``. ``always_on`` means the machine
    stays powered between those windows (too little off-time to restart it),
    so it costs a full machine but the service pattern is unchanged. A zero
    ``period`` means continuous service by ``always_on_machines + 1``.
    """

    period: float
    on_duration: float
    onset: float
    qmax: float
    always_on: bool
    always_on_machines: int
    residual_rate: float

    @property
    def off_duration(self) -> float:
        return self.period - self.on_duration

    @property
    def off_instant(self) -> float:
        return self.onset + self.on_duration

    @property
    def switching(self) -> bool:
        """True when the extra machine is powered on and off every period."""
        return self.residual_rate > 0 and self.period > 0 and not self.always_on

    @property
    def has_windows(self) -> bool:
        """True when service alternates between the two machine counts."""
        return 0 < self.on_duration < self.period


@dataclass(frozen=True)
class SwitchingPlan:
    spec: ChainSpec
    method: str
    functions: tuple[FunctionSchedule, ...]
    e2e_bound: float
    cost: CostBreakdown
    details: dict = field(default_factory=dict, compare=False)

    @property
    def reference_period(self) -> float:
        """Longest period in the plan, used to size simulation horizons."""
        return max((f.period for f in self.functions), default=0.0)

    @property
    def common_period(self) -> bool:
        periods = {f.period for f in self.functions if f.residual_rate > 0}
        return len(periods) <= 1


@dataclass(frozen=True)
class DisturbanceEvent:
    function_index: int
    time: float
    mass: float

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError(f"disturbance mass must be >= 0, got {self.mass}")
        if self.time < 0:
            raise ValueError(f"disturbance time must be >= 0, got {self.time}")


@dataclass(frozen=True)
class DisturbanceResponse:
    function_index: int
    start: float
    extended_on: float
    full_periods: int
    fraction: float
    recovery_periods: int
    enlarged_bound: float

    @property
    def end(self) -> float:
        return self.start + self.extended_on


def onset_offsets(spec: ChainSpec, period: float) -> list[float]:
    """Per-function onset minus the upstream onset, for a common ``period``.

    The first entry is relative to the source, anchored at time 0.
    """
    return onset_gaps(spec, period)


def absolute_onsets(spec: ChainSpec, period: float) -> list[float]:
    """Onsets chained from the source and wrapped into ``[0, period)``."""
    out, t = [], 0.0
    for gap in onset_offsets(spec, period):
        t += gap
        out.append(_wrap(t, period))
    return out


def _wrap(t: float, period: float) -> float:
    if period <= 0:
        return 0.0
    w = math.fmod(t, period)
    if w < 0:
        w += period
    if w >= period:
        w = 0.0
    return w


def _schedule(profile, period, onset, qmax) -> FunctionSchedule:
    rho = profile.residual_rate
    if rho == 0:
        return FunctionSchedule(period, 0.0, 0.0, qmax, True,
                                profile.always_on_machines, 0.0)
    held = period == 0 or period < profile.threshold_period
    return FunctionSchedule(period, period * rho, _wrap(onset, period), qmax, held,
                            profile.always_on_machines, rho)


def build(spec: ChainSpec, solution: Union[LinearSolution, PeriodDesign]) -> SwitchingPlan:
    """Turn a designer result into a plan with absolute onsets."""
    profiles = derive_profiles(spec)
    if isinstance(solution, LinearSolution):
        fns = tuple(_schedule(p, float(T), 0.0, float(q))
                    for p, T, q in zip(profiles, solution.periods, solution.qmax))
        details = {"lambda": solution.lam, "constrained": solution.constrained,
                   "degenerate": solution.degenerate,
                   "x": [float(v) for v in solution.x]}
        return SwitchingPlan(spec, LINEAR, fns, solution.e2e_bound, solution.cost, details)
    if isinstance(solution, PeriodDesign):
        T = solution.period
        onsets = absolute_onsets(spec, T)
        fns = tuple(_schedule(p, T, t, q)
                    for p, t, q in zip(profiles, onsets, solution.qmax))
        details = {"deadline_cap": solution.deadline_cap,
                   "alpha": list(solution.alpha), "delta": list(solution.delta),
                   "cases": [c.tag for c in solution.cases]}
        return SwitchingPlan(spec, COMMON_PERIOD, fns, solution.e2e_bound,
                             solution.cost, details)
    raise TypeError(f"cannot build a plan from {type(solution).__name__}")


def next_onset(fs: FunctionSchedule, t: float, eps: float = 0.0) -> float:
    """First scheduled onset at or after ``t - eps``."""
    j = math.ceil((t - eps - fs.onset) / fs.period)
    return fs.onset + j * fs.period


def disturbance_response(plan: SwitchingPlan, event: DisturbanceEvent) -> DisturbanceResponse:
    """Extended on-time absorbing ``event.mass`` extra requests.

    The extension starts at the first scheduled onset not before the event
    and borrows whole off-windows, then a fraction of one more.
    """
    i = event.function_index
    fs = plan.functions[i]
    if fs.residual_rate == 0 or fs.period == 0:
        raise UnrecoverableDisturbance(f"function {i} has no extra-machine schedule")
    if fs.off_duration <= 0:
        raise UnrecoverableDisturbance(f"function {i} has no off-time to borrow")
    speed = plan.spec.functions[i].nominal_speed
    ratio = (event.mass / speed) / fs.off_duration
    k = math.floor(ratio + 1e-12)
    frac = max(ratio - k, 0.0)
    extended = fs.period * k + fs.on_duration + fs.off_duration * frac
    return DisturbanceResponse(
        function_index=i,
        start=next_onset(fs, event.time),
        extended_on=extended,
        full_periods=k,
        fraction=frac,
        recovery_periods=k + 1,
        enlarged_bound=fs.qmax + event.mass,
    )


def plan_for_period(spec: ChainSpec, period: float) -> SwitchingPlan:
    """Common-period plan at an arbitrary ``period`` (not necessarily optimal)."""
    from .period import alphas, deltas, period_cost_breakdown

    profiles = derive_profiles(spec)
    onsets = absolute_onsets(spec, period)
    fns = tuple(_schedule(p, period, t, a * period)
                for p, t, a in zip(profiles, onsets, alphas(spec)))
    return SwitchingPlan(spec, COMMON_PERIOD, fns, period * math.fsum(deltas(spec)),
                         period_cost_breakdown(spec, period))
