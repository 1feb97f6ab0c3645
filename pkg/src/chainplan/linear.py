"""Per-function switching periods under a linear lower bound on service.

Each function is treated as a rate-latency server: its worst-case delay
``x_i`` grows linearly with its own period. Minimizing

    sum_i (a_i x_i + b_i / x_i)   subject to   sum_i x_i <= c

has a closed form when the deadline is slack and a one-dimensional
multiplier search otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import (ChainSpec, CostBreakdown, FunctionProfile, derive_profiles,
                    lower_bound_cost, periodic_compute_cost, queue_cost)

LAMBDA_RTOL = 1e-12
LAMBDA_MAX_ITER = 200


class NoSwitchingError(ValueError):
    """Raised when no function in the chain has residual load."""


class InactiveConstraintError(ValueError):
    """Raised when the multiplier is requested but the deadline is slack."""


@dataclass(frozen=True)
class LinearSubproblem:
    a: np.ndarray
    b: np.ndarray
    c: float
    active: tuple[int, ...]


@dataclass(frozen=True)
class LinearSolution:
    """Result of :func:`solve`; per-function arrays cover the whole chain.

    Functions without residual load carry zeros in ``x``, ``periods`` and
    ``qmax``.
    """

    x: np.ndarray
    x_unconstrained: np.ndarray
    lam: float
    periods: np.ndarray
    qmax: np.ndarray
    cost: CostBreakdown
    constrained: bool
    degenerate: bool
    subproblem: LinearSubproblem | None
    profiles: tuple[FunctionProfile, ...]

    @property
    def e2e_bound(self) -> float:
        return float(np.sum(self.x))


def build_subproblem(spec: ChainSpec,
                     profiles: list[FunctionProfile] | None = None) -> LinearSubproblem:
    if profiles is None:
        profiles = derive_profiles(spec)
    r = spec.input_rate
    active = tuple(i for i, p in enumerate(profiles) if p.switches)
    if not active:
        raise NoSwitchingError("every function runs an exact number of machines")
    a, b = [], []
    for i in active:
        fn, p = spec.functions[i], profiles[i]
        if fn.queue_cost_rate <= 0:
            raise ValueError(
                f"function {i}: the linear method needs queue_cost_rate > 0")
        rho = p.residual_rate
        a.append(fn.queue_cost_rate * r)
        b.append(fn.compute_cost_rate * fn.switch_delay
                 * (fn.nominal_speed / r) * rho * (1 - rho))
    return LinearSubproblem(np.array(a), np.array(b), spec.e2e_deadline, active)


def solve_unconstrained(p: LinearSubproblem) -> np.ndarray:
    return np.sqrt(p.b / p.a)


def _residual(p: LinearSubproblem, lam: float) -> float:
    return math.fsum(np.sqrt(p.b / (p.a + lam))) - p.c


def solve_lambda(p: LinearSubproblem) -> float:
    """Positive multiplier making the deadline constraint tight.

    Bisection on ``g(lam) = sum sqrt(b / (a + lam)) - c``, which is strictly
    decreasing in ``lam``.
    """
    if _residual(p, 0.0) <= 0:
        raise InactiveConstraintError("deadline constraint is not active")
    lo, hi = 0.0, float(np.max(p.a))
    while _residual(p, hi) >= 0:
        lo, hi = hi, 2 * hi
    tol = LAMBDA_RTOL * p.c
    mid = 0.5 * (lo + hi)
    for _ in range(LAMBDA_MAX_ITER):
        mid = 0.5 * (lo + hi)
        g = _residual(p, mid)
        if abs(g) <= tol or mid in (lo, hi):
            break
        if g > 0:
            lo = mid
        else:
            hi = mid
    return mid


def unconstrained_cost(p: LinearSubproblem, lower_bound: float) -> float:
    """Cost at the unconstrained optimum, ignoring the threshold correction."""
    return 2 * math.fsum(np.sqrt(p.a * p.b)) + lower_bound


def constrained_cost(p: LinearSubproblem, lam: float, lower_bound: float) -> float:
    """Cost at ``x_i = sqrt(b_i / (a_i + lam))``, ignoring the threshold correction."""
    ab = np.sqrt(p.a * p.b)
    terms = ab * (np.sqrt(p.a / (p.a + lam)) + np.sqrt((p.a + lam) / p.a))
    return math.fsum(terms) + lower_bound


def solve(spec: ChainSpec) -> LinearSolution:
    """Full linear-approximation design for ``spec``.

    Functions whose resulting period falls below their threshold are charged
    as permanently running the extra machine; periods are not re-optimized.
    """
    profiles = derive_profiles(spec)
    n = len(spec)
    r = spec.input_rate
    lb = lower_bound_cost(spec)
    x = np.zeros(n)
    x_free = np.zeros(n)
    lam = 0.0
    constrained = False
    sub = None
    try:
        sub = build_subproblem(spec, profiles)
    except NoSwitchingError:
        pass

    if sub is not None:
        xs = solve_unconstrained(sub)
        x_free[list(sub.active)] = xs
        if math.fsum(xs) > sub.c:
            lam = solve_lambda(sub)
            xs = np.sqrt(sub.b / (sub.a + lam))
            constrained = True
        x[list(sub.active)] = xs

    periods = np.zeros(n)
    qmax = np.zeros(n)
    compute = []
    queue = []
    for i, (fn, p) in enumerate(zip(spec.functions, profiles)):
        if p.switches:
            rho = p.residual_rate
            periods[i] = r * x[i] / (fn.nominal_speed * rho * (1 - rho))
            qmax[i] = fn.nominal_speed * periods[i] * rho * (1 - rho)
        compute.append(periodic_compute_cost(p, fn, periods[i]))
        queue.append(queue_cost(fn, qmax[i]))

    degenerate = sub is None or bool(np.all(sub.b == 0))
    cost = CostBreakdown(math.fsum(compute), math.fsum(queue), lb)
    return LinearSolution(x=x, x_unconstrained=x_free, lam=lam, periods=periods,
                          qmax=qmax, cost=cost, constrained=constrained,
                          degenerate=degenerate, subproblem=sub,
                          profiles=tuple(profiles))
