"""Problem data and cost primitives for a service chain fed at a constant rate.

A chain is an ordered list of functions. Function ``i`` runs
``always_on_machines`` machines permanently and toggles one extra machine
to absorb the residual load ``residual_rate * nominal_speed``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

# r / s within this distance of an integer is treated as that integer
SNAP_TOL = 1e-9


@dataclass(frozen=True)
class FunctionSpec:
    """Parameters of one function in the chain.

    Attributes:
        nominal_speed: requests/second served by one machine.
        compute_cost_rate: cost per second per running machine.
        queue_cost_rate: cost per second per reserved queue slot.
        switch_delay: combined on+off switching delay, seconds.
    """

    nominal_speed: float
    compute_cost_rate: float
    queue_cost_rate: float
    switch_delay: float

    def __post_init__(self):
        if not self.nominal_speed > 0:
            raise ValueError(f"nominal_speed must be > 0, got {self.nominal_speed}")
        for name in ("compute_cost_rate", "queue_cost_rate", "switch_delay"):
            value = getattr(self, name)
            if not value >= 0:
                raise ValueError(f"{name} must be >= 0, got {value}")


@dataclass(frozen=True)
class ChainSpec:
    input_rate: float
    e2e_deadline: float
    functions: tuple[FunctionSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        if not self.input_rate > 0:
            raise ValueError(f"input_rate must be > 0, got {self.input_rate}")
        if not self.e2e_deadline > 0:
            raise ValueError(f"e2e_deadline must be > 0, got {self.e2e_deadline}")
        if not self.functions:
            raise ValueError("a chain needs at least one function")

    def __len__(self) -> int:
        return len(self.functions)

    def scaled_costs(self, k: float) -> "ChainSpec":
        """Copy with every compute and queue cost rate multiplied by ``k``."""
        fns = [
            FunctionSpec(f.nominal_speed, k * f.compute_cost_rate,
                         k * f.queue_cost_rate, f.switch_delay)
            for f in self.functions
        ]
        return ChainSpec(self.input_rate, self.e2e_deadline, fns)

    def with_deadline(self, deadline: float) -> "ChainSpec":
        return ChainSpec(self.input_rate, deadline, self.functions)


@dataclass(frozen=True)
class FunctionProfile:
    """Quantities derived from the input rate for one function.

    ``threshold_period`` is the period below which the off-window is shorter
    than the switch delay, so the extra machine is simply left on.
    """

    always_on_machines: int
    residual_rate: float
    threshold_period: float
    lb_cost_share: float

    @property
    def switches(self) -> bool:
        """True when the function needs an extra machine part of the time."""
        return self.residual_rate > 0


@dataclass(frozen=True)
class CostBreakdown:
    compute_cost: float
    queue_cost: float
    lower_bound: float

    @property
    def total(self) -> float:
        return self.compute_cost + self.queue_cost

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(self.compute_cost + other.compute_cost,
                             self.queue_cost + other.queue_cost,
                             self.lower_bound + other.lower_bound)


def split_rate(rate: float, speed: float) -> tuple[int, float]:
    """Return ``(floor(rate/speed), rate/speed - floor(rate/speed))``.

    Ratios within ``SNAP_TOL`` of an integer snap to it, so floating-point
    noise never produces a residual just below one.
    """
    ratio = rate / speed
    nearest = round(ratio)
    if abs(ratio - nearest) <= SNAP_TOL * max(1.0, abs(ratio)):
        return int(nearest), 0.0
    m = math.floor(ratio)
    return m, ratio - m


def derive_profile(spec: ChainSpec, index: int) -> FunctionProfile:
    """Profile of function ``index`` (0-based) under the chain's input rate."""
    fn = spec.functions[index]
    m, rho = split_rate(spec.input_rate, fn.nominal_speed)
    return FunctionProfile(
        always_on_machines=m,
        residual_rate=rho,
        threshold_period=fn.switch_delay / (1.0 - rho),
        lb_cost_share=fn.compute_cost_rate * spec.input_rate / fn.nominal_speed,
    )


def derive_profiles(spec: ChainSpec) -> list[FunctionProfile]:
    return [derive_profile(spec, i) for i in range(len(spec))]


def lower_bound_cost(spec: ChainSpec) -> float:
    """Cost of running exactly ``r / s_i`` fractional machines everywhere."""
    return math.fsum(f.compute_cost_rate * spec.input_rate / f.nominal_speed
                     for f in spec.functions)


def periodic_compute_cost(profile: FunctionProfile, fn: FunctionSpec,
                          period: float) -> float:
    """Average compute cost per second when the extra machine cycles with ``period``.

    Periods shorter than the threshold (and ``period == 0``) leave the extra
    machine on permanently. Functions without residual load never start it.
    """
    if period < 0:
        raise ValueError(f"period must be >= 0, got {period}")
    m = profile.always_on_machines
    if profile.residual_rate == 0:
        return fn.compute_cost_rate * m
    if period == 0 or period < profile.threshold_period:
        return fn.compute_cost_rate * (m + 1)
    return fn.compute_cost_rate * (m + profile.residual_rate + fn.switch_delay / period)


def queue_cost(fn: FunctionSpec, qmax: float) -> float:
    if qmax < 0:
        raise ValueError(f"qmax must be >= 0, got {qmax}")
    return fn.queue_cost_rate * qmax


def reference_chain(deadline: float = 0.02) -> ChainSpec:
    """The two-function reference chain used throughout the docs and tests."""
    return ChainSpec(
        input_rate=17.0,
        e2e_deadline=deadline,
        functions=[
            FunctionSpec(6.0, 6.0, 0.5, 0.01),
            FunctionSpec(8.0, 8.0, 0.5, 0.01),
        ],
    )
