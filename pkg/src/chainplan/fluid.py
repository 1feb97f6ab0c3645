"""Exact event-driven simulation of the fluid chain.

Rates are piecewise constant, so queues and cumulative curves are piecewise
linear and every extremum sits on a breakpoint. A function serves at full
capacity while its queue is non-empty and passes its inflow through (up to
capacity) while empty.

Disturbances are impulses of extra requests. The hit function lengthens the
on-time of its extra machine at its next onset; once that extension ends, the
same mass has moved downstream and the next function does the same.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ChainSpec, CostBreakdown, lower_bound_cost
from .schedule import DisturbanceEvent, SwitchingPlan

MERGE_RTOL = 1e-12
DIVERGENCE_FACTOR = 1e6


class SimulationDivergence(RuntimeError):
    """A queue grew far beyond its analytic bound."""


@dataclass(frozen=True)
class SimulationConfig:
    """Horizon and perturbations for :func:`simulate`.

    The run lasts ``warmup + periods`` reference periods (or ``warmup``
    periods plus ``horizon`` seconds). Measurements skip the warm-up, which
    defaults to one period per function so that start-up transients have
    left every stage.
    """

    periods: int = 10
    warmup: int | None = None
    horizon: float | None = None
    initial_queues: Sequence[float] | None = None
    disturbances: Sequence[DisturbanceEvent] = ()

    def __post_init__(self):
        if self.horizon is None and self.periods <= 0:
            raise ValueError("periods must be positive")
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.warmup is not None and self.warmup < 0:
            raise ValueError("warmup must be >= 0")
        if self.initial_queues is not None and min(self.initial_queues, default=0) < 0:
            raise ValueError("initial queues must be >= 0")


@dataclass(frozen=True)
class Extension:
    function_index: int
    start: float
    end: float
    mass: float
    induced: bool


@dataclass
class SimulationTrace:
    """Breakpoint record of one run.

    Row ``k`` of ``queues`` and ``served`` holds values at ``times[k]``
    (after any impulse at that instant); row ``k`` of ``machines`` and
    ``rates`` holds the constant values on ``[times[k], times[k+1])``.
    """

    input_rate: float
    times: np.ndarray
    queues: np.ndarray
    machines: np.ndarray
    rates: np.ndarray
    served: np.ndarray
    arrivals: np.ndarray
    injected: np.ndarray
    window: tuple[float, float]
    periods: tuple[float, ...]
    on_events: tuple[tuple[float, ...], ...]
    extensions: tuple[Extension, ...]
    disturbed: bool
    max_queue: np.ndarray = field(init=False)

    def __post_init__(self):
        self.max_queue = self.queues[self._window_mask()].max(axis=0)

    def _window_mask(self) -> np.ndarray:
        lo, hi = self.window
        eps = MERGE_RTOL * max(hi, 1.0)
        return (self.times >= lo - eps) & (self.times <= hi + eps)

    @property
    def n_functions(self) -> int:
        return self.queues.shape[1]

    def running_delay(self) -> np.ndarray:
        """``t - S_n(t) / r`` at every breakpoint."""
        return self.times - self.served[:, -1] / self.input_rate

    def queue_at(self, t) -> np.ndarray:
        """Linearly interpolated queues at times ``t``; shape ``(len(t), n)``."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.column_stack([np.interp(t, self.times, self.queues[:, i])
                                for i in range(self.n_functions)])

    def segment_index(self, t) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, len(self.times) - 1)


class _Function:
    """Mutable switching state of one function during a run."""

    def __init__(self, fs, speed, index):
        self.fs = fs
        self.index = index
        self.base = fs.always_on_machines * speed
        self.speed = speed
        self.pending: list[tuple[float, float, bool]] = []
        self.extension: tuple[float, float, float, bool] | None = None
        self.on_events: list[float] = []
        self.windows = fs.residual_rate > 0 and fs.has_windows
        full = fs.residual_rate > 0 and not self.windows and fs.on_duration > 0
        self.serving = full or (fs.residual_rate > 0 and fs.period == 0)
        self.next_toggle = math.inf
        if self.windows:
            T, on = fs.period, fs.on_duration
            if fs.onset == 0:
                self.next_toggle = 0.0
            elif fs.onset + on > T:
                self.serving = True
                self.next_toggle = fs.onset + on - T
            else:
                self.next_toggle = fs.onset

    @property
    def capacity(self) -> float:
        return self.base + (self.speed if self.serving else 0.0)

    @property
    def powered(self) -> int:
        extra = 1 if (self.serving or (self.fs.always_on and self.fs.residual_rate > 0)) else 0
        return self.fs.always_on_machines + extra

    def toggle(self, t: float, eps: float, downstream: "_Function | None",
               extensions: list) -> None:
        fs = self.fs
        if not self.serving:
            self.serving = True
            if not fs.always_on:
                self.on_events.append(t)
            off = t + fs.on_duration
            if self.pending and self.pending[0][0] <= t + eps:
                _, mass, induced = self.pending.pop(0)
                ratio = (mass / self.speed) / fs.off_duration
                k = math.floor(ratio + 1e-12)
                frac = max(ratio - k, 0.0)
                off = t + fs.period * k + fs.on_duration + fs.off_duration * frac
                self.extension = (t, off, mass, induced)
            self.next_toggle = off
        else:
            self.serving = False
            if self.extension is not None:
                start, end, mass, induced = self.extension
                extensions.append(Extension(self.index, start, t, mass, induced))
                if downstream is not None:
                    downstream.pending.append((t, mass, True))
                self.extension = None
            j = math.ceil((t - eps - fs.onset) / fs.period)
            self.next_toggle = fs.onset + j * fs.period


def simulate(plan: SwitchingPlan, config: SimulationConfig | None = None) -> SimulationTrace:
    """Run the plan from empty queues (unless configured otherwise)."""
    if config is None:
        config = SimulationConfig()
    spec = plan.spec
    n = len(spec)
    r = spec.input_rate
    T = plan.reference_period or 1.0
    warm = n if config.warmup is None else config.warmup
    t0 = warm * T
    t_end = t0 + (config.horizon if config.horizon is not None else config.periods * T)
    eps = MERGE_RTOL * T
    qtol = MERGE_RTOL * r * T

    funcs = [_Function(fs, f.nominal_speed, i)
             for i, (fs, f) in enumerate(zip(plan.functions, spec.functions))]
    limits = []
    for fs, f in zip(plan.functions, spec.functions):
        scale = fs.qmax if fs.qmax > 0 else 1e-3 * (r + f.nominal_speed) * T
        limits.append(DIVERGENCE_FACTOR * scale)

    q = [0.0] * n if config.initial_queues is None else [float(v) for v in config.initial_queues]
    if len(q) != n:
        raise ValueError("initial_queues must have one entry per function")
    S = [0.0] * n
    R0 = 0.0
    injected = [0.0] * n
    impulses = sorted(config.disturbances, key=lambda e: (e.time, e.function_index))
    for ev in impulses:
        if not 0 <= ev.function_index < n:
            raise ValueError(f"disturbance targets unknown function {ev.function_index}")
    next_imp = 0
    extensions: list[Extension] = []

    rec_t, rec_q, rec_m, rec_s, rec_S, rec_R, rec_inj = [], [], [], [], [], [], []
    t = 0.0
    while True:
        while next_imp < len(impulses) and impulses[next_imp].time <= t + eps:
            ev = impulses[next_imp]
            q[ev.function_index] += ev.mass
            injected[ev.function_index] += ev.mass
            funcs[ev.function_index].pending.append((ev.time, ev.mass, False))
            next_imp += 1
        for _ in range(4 * n + 4):
            due = [f for f in funcs if f.next_toggle <= t + eps]
            if not due:
                break
            for f in due:
                down = funcs[f.index + 1] if f.index + 1 < n else None
                f.toggle(t, eps, down, extensions)

        rates = [0.0] * n
        slopes = [0.0] * n
        inflow = r
        for i, f in enumerate(funcs):
            cap = f.capacity
            if q[i] > qtol or inflow >= cap:
                s = cap
            else:
                q[i] = 0.0
                s = inflow
            rates[i] = s
            slopes[i] = inflow - s
            inflow = s

        rec_t.append(t)
        rec_q.append(list(q))
        rec_m.append([f.powered for f in funcs])
        rec_s.append(rates)
        rec_S.append(list(S))
        rec_R.append(R0)
        rec_inj.append(list(injected))
        for i in range(n):
            if q[i] > limits[i]:
                raise SimulationDivergence(
                    f"queue {i} reached {q[i]:.6g} at t={t:.6g}, limit {limits[i]:.6g}")
        if t >= t_end - eps:
            break

        t_next = t_end
        if t < t0 - eps:
            t_next = t0
        if next_imp < len(impulses):
            t_next = min(t_next, impulses[next_imp].time)
        for f in funcs:
            t_next = min(t_next, f.next_toggle)
        for i in range(n):
            if slopes[i] < 0 and q[i] > 0:
                t_next = min(t_next, t + q[i] / -slopes[i])
        dt = max(t_next - t, 0.0)
        for i in range(n):
            q[i] += slopes[i] * dt
            if q[i] <= qtol and slopes[i] < 0:
                q[i] = 0.0
            S[i] += rates[i] * dt
        R0 += r * dt
        t = t_next

    return SimulationTrace(
        input_rate=r,
        times=np.array(rec_t),
        queues=np.array(rec_q),
        machines=np.array(rec_m, dtype=int),
        rates=np.array(rec_s),
        served=np.array(rec_S),
        arrivals=np.array(rec_R),
        injected=np.array(rec_inj),
        window=(t0, t_end),
        periods=tuple(fs.period for fs in plan.functions),
        on_events=tuple(tuple(f.on_events) for f in funcs),
        extensions=tuple(extensions),
        disturbed=bool(impulses) or config.initial_queues is not None and any(
            v > 0 for v in config.initial_queues),
    )


def measure_e2e_delay(trace: SimulationTrace) -> float:
    """Worst end-to-end delay over the measurement window.

    With a constant-rate input the request leaving the chain at ``t`` entered
    at ``S_n(t) / r``, so the delay is ``t - S_n(t) / r``.
    """
    if trace.disturbed:
        raise ValueError("delay shortcut needs a constant-rate input without disturbances")
    mask = trace._window_mask()
    return max(float(np.max(trace.running_delay()[mask])), 0.0)


def _machine_integral(trace: SimulationTrace, i: int, lo: float, hi: float) -> float:
    t = trace.times
    starts = np.clip(t, lo, hi)
    ends = np.clip(np.append(t[1:], t[-1]), lo, hi)
    return float(np.sum(trace.machines[:, i] * (ends - starts)))


def measure_cost(trace: SimulationTrace, spec: ChainSpec,
                 flags: list[str] | None = None,
                 reservation: Sequence[float] | None = None) -> CostBreakdown:
    """Time-averaged compute cost plus a queue reservation.

    Each function is averaged over the largest whole number of its own
    periods inside the window; a shortened window is reported in ``flags``.
    The queue term is charged on the measured maxima unless ``reservation``
    gives the buffer sizes actually provisioned (usually the plan's qmax).
    """
    lo, hi = trace.window
    compute = []
    for i, f in enumerate(spec.functions):
        T = trace.periods[i]
        end = hi
        if T > 0:
            whole = math.floor((hi - lo) / T + 1e-9)
            if whole == 0:
                raise ValueError(f"window shorter than one period of function {i}")
            end = lo + whole * T
            if flags is not None and abs(end - hi) > MERGE_RTOL * max(hi, 1.0) * 1e3:
                flags.append(f"F{i + 1}: averaged over {whole} whole periods")
        span = end - lo
        eps = MERGE_RTOL * max(end, 1.0)
        starts = [s for s in trace.on_events[i] if lo - eps <= s < end - eps]
        machines = _machine_integral(trace, i, lo, end) / span
        compute.append(f.compute_cost_rate * (machines + f.switch_delay * len(starts) / span))
    held = trace.max_queue if reservation is None else reservation
    if len(held) != len(spec):
        raise ValueError("reservation needs one entry per function")
    queue = [f.queue_cost_rate * float(m) for f, m in zip(spec.functions, held)]
    return CostBreakdown(math.fsum(compute), math.fsum(queue), lower_bound_cost(spec))
