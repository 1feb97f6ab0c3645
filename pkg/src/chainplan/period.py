"""Common switching period shared by every function in the chain.

Stages are numbered 1..n; stage 0 is the constant-rate source, modelled as a
function with ``speed = r``, one permanent machine and no residual load.
With a common period ``T`` the worst queue at stage ``i`` is ``alpha_i * T``
and the end-to-end delay is ``T * sum(delta_i)``, provided each stage starts
its extra machine at the offset returned by :func:`pair_onset_gap`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .model import (ChainSpec, CostBreakdown, FunctionProfile, derive_profiles,
                    lower_bound_cost)

class Stage(NamedTuple):
    speed: float
    machines: int
    rho: float


class PairCase(NamedTuple):
    tag: str
    upstream: int
    downstream: int


def stages(spec: ChainSpec, profiles: list[FunctionProfile] | None = None) -> list[Stage]:
    """Stage list with the source prepended at index 0."""
    if profiles is None:
        profiles = derive_profiles(spec)
    out = [Stage(spec.input_rate, 1, 0.0)]
    for fn, p in zip(spec.functions, profiles):
        out.append(Stage(fn.nominal_speed, p.always_on_machines, p.residual_rate))
    return out


def _classify(up: Stage, down: Stage) -> str:
    low = down.machines * down.speed >= up.machines * up.speed
    high = (down.machines + 1) * down.speed >= (up.machines + 1) * up.speed
    return ("1" if low else "2") + ("a" if high else "b")


def classify(spec: ChainSpec, i: int) -> PairCase:
    """Case of the pair (stage ``i-1``, stage ``i``), ``1 <= i <= n``."""
    st = stages(spec)
    return PairCase(_classify(st[i - 1], st[i]), i - 1, i)


def _alpha(up: Stage, down: Stage) -> float:
    s0, r0 = up.speed, up.rho
    s1, r1 = down.speed, down.rho
    return max(
        r1 * (s1 * (1 - r1) - s0 * (1 - r0)),
        (1 - r0) * (s0 * r0 - s1 * r1),
        r0 * (s0 * (1 - r0) - s1 * (1 - r1)),
        (1 - r1) * (s1 * r1 - s0 * r0),
        0.0,
    )


def _delta(up: Stage, down: Stage, r: float) -> float:
    s0, r0 = up.speed, up.rho
    s1, r1 = down.speed, down.rho
    tag = _classify(up, down)
    if tag == "1a":
        gain = s1 * (1 - r1) - s0 * (1 - r0)
        return s1 * r1 ** 2 * gain / (s0 * (1 - r0) + s1 * r1) / r
    if tag == "1b":
        return 0.0
    if tag == "2a":
        if r1 >= r0:
            return (s0 * r0 * (r0 - r1) + (1 - r1) * (s1 * r1 - s0 * r0)) / r
        gain = s1 * (1 - r1) - s0 * (1 - r0)
        return (r1 * gain + s0 * (r0 - 1) * (r0 - r1)) / r
    # rise over the joint off-window is (1 - r1) * (s1*r1 - s0*r0) per unit T
    return s1 * (1 - r1) ** 2 * (s1 * r1 - s0 * r0) / (s1 * (1 - r1) + s0 * r0) / r


def _gap(up: Stage, down: Stage, period: float) -> float:
    s0, r0 = up.speed, up.rho
    s1, r1 = down.speed, down.rho
    tag = _classify(up, down)
    if tag == "1a":
        return period * r1 * (s1 * (1 - r1) - s0 * (1 - r0)) / (s0 * (1 - r0) + s1 * r1)
    if tag == "1b":
        return 0.0
    if tag == "2a":
        return period * (r0 - r1)
    q_on = period * (1 - r1) * (s1 * r1 - s0 * r0)
    return -q_on / (s1 * (1 - r1) + s0 * r0)


def alpha_coefficient(spec: ChainSpec, i: int) -> float:
    """Worst queue at stage ``i`` per second of period."""
    st = stages(spec)
    return _alpha(st[i - 1], st[i])


def delta_coefficient(spec: ChainSpec, i: int) -> float:
    """Delay added by stage ``i`` per second of period."""
    st = stages(spec)
    return _delta(st[i - 1], st[i], spec.input_rate)


def pair_onset_gap(spec: ChainSpec, i: int, period: float) -> float:
    """Onset of stage ``i`` minus onset of stage ``i-1`` that minimizes queue ``i``."""
    st = stages(spec)
    return _gap(st[i - 1], st[i], period)


def alphas(spec: ChainSpec) -> list[float]:
    st = stages(spec)
    return [_alpha(st[i - 1], st[i]) for i in range(1, len(st))]


def deltas(spec: ChainSpec) -> list[float]:
    st = stages(spec)
    return [_delta(st[i - 1], st[i], spec.input_rate) for i in range(1, len(st))]


def onset_gaps(spec: ChainSpec, period: float) -> list[float]:
    st = stages(spec)
    return [_gap(st[i - 1], st[i], period) for i in range(1, len(st))]


def queue_cost_slope(spec: ChainSpec) -> float:
    """``sum_i queue_cost_rate_i * alpha_i``: queue cost per second of period."""
    return math.fsum(f.queue_cost_rate * al for f, al in zip(spec.functions, alphas(spec)))


def deadline_cap(spec: ChainSpec) -> float:
    """Largest period meeting the deadline; ``inf`` when no stage adds delay."""
    total = math.fsum(deltas(spec))
    if total <= 0:
        return math.inf
    return spec.e2e_deadline / total


def _switching_terms(spec, profiles, period):
    """Compute cost above the lower bound, as (always-on part, switching part)."""
    held, cycled = [], []
    for fn, p in zip(spec.functions, profiles):
        if not p.switches:
            continue
        if period == 0 or period < p.threshold_period:
            held.append(fn.compute_cost_rate * (1 - p.residual_rate))
        else:
            cycled.append(fn.compute_cost_rate * fn.switch_delay / period)
    return math.fsum(held), math.fsum(cycled)


def cost_of_period(spec: ChainSpec, period: float) -> float:
    """Total cost per second when every function cycles with ``period``.

    ``period == 0`` is the limit where every extra machine stays on.
    """
    return period_cost_breakdown(spec, period).total


def period_cost_breakdown(spec: ChainSpec, period: float) -> CostBreakdown:
    if period < 0:
        raise ValueError(f"period must be >= 0, got {period}")
    profiles = derive_profiles(spec)
    lb = lower_bound_cost(spec)
    held, cycled = _switching_terms(spec, profiles, period)
    return CostBreakdown(compute_cost=lb + held + cycled,
                         queue_cost=queue_cost_slope(spec) * period,
                         lower_bound=lb)


@dataclass(frozen=True)
class StationaryPoint:
    """Zero of dJ/dT on the interval ``(lo, hi)`` of the candidate grid."""

    lo: float
    hi: float
    value: float | None
    interior: bool


@dataclass(frozen=True)
class PeriodDesign:
    period: float
    alpha: tuple[float, ...]
    delta: tuple[float, ...]
    cases: tuple[PairCase, ...]
    deadline_cap: float
    breakpoints: tuple[float, ...]
    stationary: tuple[StationaryPoint, ...]
    candidates: tuple[tuple[float, float], ...]
    qmax: tuple[float, ...]
    e2e_bound: float
    cost: CostBreakdown
    onset_offsets: tuple[float, ...]
    profiles: tuple[FunctionProfile, ...]

    @property
    def threshold_periods(self) -> tuple[float, ...]:
        return tuple(p.threshold_period for p in self.profiles)


def optimize(spec: ChainSpec) -> PeriodDesign:
    """Optimal common period over ``[0, deadline_cap]``.

    J(T) is smooth between thresholds, so the minimum lies at a threshold, an
    end point, or a stationary point inside one of the intervals. Ties go to
    the smallest period.
    """
    profiles = derive_profiles(spec)
    st = stages(spec, profiles)
    r = spec.input_rate
    al = tuple(_alpha(st[i - 1], st[i]) for i in range(1, len(st)))
    de = tuple(_delta(st[i - 1], st[i], r) for i in range(1, len(st)))
    cases = tuple(PairCase(_classify(st[i - 1], st[i]), i - 1, i)
                  for i in range(1, len(st)))
    a = math.fsum(f.queue_cost_rate * x for f, x in zip(spec.functions, al))
    total_delta = math.fsum(de)
    # Every function with residual load follows a constant-rate stage somewhere
    # upstream and so adds delay. Zero total delay therefore means nothing
    # switches, J is flat, and the all-on limit T = 0 is as good as any period.
    c = spec.e2e_deadline / total_delta if total_delta > 0 else 0.0

    # switching functions, as (threshold, j_c * Delta)
    sw = [(p.threshold_period, f.compute_cost_rate * f.switch_delay)
          for f, p in zip(spec.functions, profiles) if p.switches]

    grid = sorted({0.0, c} | {t for t, _ in sw if t < c})
    stationary = []
    for lo, hi in zip(grid[:-1], grid[1:]):
        k = math.fsum(kk for t, kk in sw if t < hi)
        if a > 0 and k > 0:
            v = math.sqrt(k / a)
            stationary.append(StationaryPoint(lo, hi, v, lo < v < hi))
        else:
            stationary.append(StationaryPoint(lo, hi, None, False))

    points = sorted(set(grid) | {s.value for s in stationary if s.interior})
    evaluated = tuple((t, cost_of_period(spec, t)) for t in points)
    best_t, best_j = evaluated[0]
    for t, j in evaluated[1:]:
        if j < best_j:
            best_t, best_j = t, j

    gaps = [_gap(st[i - 1], st[i], best_t) for i in range(1, len(st))]
    return PeriodDesign(
        period=best_t,
        alpha=al,
        delta=de,
        cases=cases,
        deadline_cap=c,
        breakpoints=tuple(grid),
        stationary=tuple(stationary),
        candidates=evaluated,
        qmax=tuple(x * best_t for x in al),
        e2e_bound=best_t * total_delta,
        cost=period_cost_breakdown(spec, best_t),
        onset_offsets=tuple(gaps),
        profiles=tuple(profiles),
    )
