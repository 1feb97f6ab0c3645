"""Command-line front end.

    chainplan solve --method {linear,common-period} --config CHAIN.json --out PLAN.json
    chainplan simulate --plan PLAN.json --periods N [--disturbance i,t,m]... [--dt SEC] --trace OUT.csv
    chainplan compare --config CHAIN.json
    chainplan compare --sweep N --seed S [--jobs K]

Functions are numbered from 1 on the command line and in printed tables.
"""

from __future__ import annotations

import argparse
import math
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .fluid import (SimulationConfig, SimulationDivergence, measure_cost,
                    measure_e2e_delay, simulate)
from .formats import ConfigError, load_chain, load_plan, save_plan, write_trace
from .linear import solve as solve_linear
from .model import derive_profiles
from .period import optimize
from .sampling import random_chain
from .schedule import (COMMON_PERIOD, LINEAR, METHODS, DisturbanceEvent,
                       UnrecoverableDisturbance, build, disturbance_response)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_DEGENERATE = 4
EXIT_DIVERGENCE = 5

CHECK_RTOL = 1e-6


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _err(msg: str) -> None:
    print(f"chainplan: error: {msg}", file=sys.stderr)


def _print_cost(cost, indent="  ") -> None:
    print(f"{indent}lower bound J_lb : {cost.lower_bound:.6f}")
    print(f"{indent}compute cost     : {cost.compute_cost:.6f}")
    print(f"{indent}queue cost       : {cost.queue_cost:.6f}")
    print(f"{indent}total cost       : {cost.total:.6f}")


def _print_plan(plan) -> None:
    profiles = derive_profiles(plan.spec)
    print(f"  {'fn':>3} {'m_bar':>5} {'rho':>9} {'T':>10} {'T_on':>10} "
          f"{'onset':>10} {'qmax':>10}  mode")
    for i, (fs, p) in enumerate(zip(plan.functions, profiles), start=1):
        if p.residual_rate == 0:
            mode = "no extra machine"
        elif fs.period == 0:
            mode = "extra always on"
        elif fs.always_on:
            mode = "extra kept powered"
        else:
            mode = "switching"
        print(f"  {i:>3} {p.always_on_machines:>5} {p.residual_rate:>9.6f} "
              f"{fs.period:>10.6f} {fs.on_duration:>10.6f} {fs.onset:>10.6f} "
              f"{fs.qmax:>10.6f}  {mode}")
    print(f"  e2e bound        : {plan.e2e_bound:.6g} s (deadline {plan.spec.e2e_deadline:.6g} s)")
    _print_cost(plan.cost)


def _design(spec, method):
    """Plan plus a diagnostic string when the design is degenerate."""
    if method == LINEAR:
        sol = solve_linear(spec)
        plan = build(spec, sol)
        print(f"  lambda           : {sol.lam:.6g}")
        print(f"  branch           : {'constrained' if sol.constrained else 'unconstrained'}"
              f" (sum x = {sol.e2e_bound:.6g}, free sum x = {float(np.sum(sol.x_unconstrained)):.6g})")
        diag = "no function needs an extra machine" if sol.subproblem is None else (
            "every switch delay is zero, so nothing trades off against queues"
            if sol.degenerate else None)
        return plan, diag
    design = optimize(spec)
    plan = build(spec, design)
    print(f"  T*               : {design.period:.6g} s")
    print(f"  deadline cap c   : {_fmt(design.deadline_cap)}")
    print("  candidates       : " + ", ".join(f"J({_fmt(t)})={j:.6g}"
                                              for t, j in design.candidates))
    diag = None if any(p.switches for p in design.profiles) else \
        "no function needs an extra machine"
    return plan, diag


def cmd_solve(args) -> int:
    spec = load_chain(args.config)
    print(f"method: {args.method}")
    plan, diag = _design(spec, args.method)
    _print_plan(plan)
    save_plan(plan, args.out)
    if diag:
        _err(f"degenerate design: {diag}")
        return EXIT_DEGENERATE
    return EXIT_OK


def _parse_disturbance(text: str) -> DisturbanceEvent:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected index,time,mass, got {text!r}")
    try:
        idx = int(parts[0])
        t, m = float(parts[1]), float(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed disturbance {text!r}") from None
    if idx < 1 or not (math.isfinite(t) and math.isfinite(m)) or t < 0 or m < 0:
        raise argparse.ArgumentTypeError(
            f"disturbance {text!r} needs index >= 1, time >= 0 and mass >= 0")
    return DisturbanceEvent(idx - 1, t, m)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return v


def _check(label: str, measured: float, bound: float) -> bool:
    ok = measured <= bound * (1 + CHECK_RTOL) + 1e-12
    print(f"  {'PASS' if ok else 'FAIL'} {label}: measured {measured:.9g} <= bound {bound:.9g}")
    return ok


def cmd_simulate(args) -> int:
    plan = load_plan(args.plan)
    n = len(plan.spec)
    events = list(args.disturbance)
    for ev in events:
        if ev.function_index >= n:
            _err(f"disturbance targets function {ev.function_index + 1} of a {n}-function chain")
            return EXIT_VALIDATION
    try:
        responses = [disturbance_response(plan, ev) for ev in events]
    except UnrecoverableDisturbance as exc:
        _err(str(exc))
        return EXIT_DEGENERATE
    config = SimulationConfig(periods=args.periods, warmup=args.warmup, disturbances=events)
    try:
        trace = simulate(plan, config)
    except SimulationDivergence as exc:
        _err(f"simulation diverged: {exc}")
        return EXIT_DIVERGENCE
    write_trace(trace, args.trace, args.dt)

    lo, hi = trace.window
    print(f"method: {plan.method}; measured over t in [{lo:.6g}, {hi:.6g}]")
    all_ok = True
    print("queue checks:")
    # a disturbance may land during the warm-up, so disturbed runs check every instant
    peaks = trace.queues.max(axis=0) if events else trace.max_queue
    upstream_mass = 0.0
    for i, fs in enumerate(plan.functions):
        upstream_mass += math.fsum(ev.mass for ev in events if ev.function_index == i)
        label = f"q{i + 1}"
        bound = fs.qmax
        if upstream_mass > 0:
            label += f" (enlarged by d={upstream_mass:.6g})"
            bound += upstream_mass
        all_ok &= _check(label, float(peaks[i]), bound)
    if plan.method == LINEAR and not all_ok:
        print("  note: linear queue bounds assume each function sees a constant inflow;"
              " downstream of a switching function the inflow is bursty")
    if events:
        print("delay check: skipped (disturbed run)")
        for ev, resp in zip(events, responses):
            print(f"  disturbance at F{ev.function_index + 1}, t={ev.time:.6g}, d={ev.mass:.6g}: "
                  f"extended on-time {resp.extended_on:.6g} s from t={resp.start:.6g}, "
                  f"recovery within {resp.recovery_periods} periods")
        for ext in trace.extensions:
            kind = "passed on" if ext.induced else "direct"
            print(f"  extension F{ext.function_index + 1} ({kind}): "
                  f"[{ext.start:.6g}, {ext.end:.6g}] for d={ext.mass:.6g}")
    else:
        delay = measure_e2e_delay(trace)
        print("delay check:")
        all_ok &= _check("e2e delay", delay, plan.e2e_bound)

    flags: list[str] = []
    measured = measure_cost(trace, plan.spec, flags)
    reserved = measure_cost(trace, plan.spec, reservation=[f.qmax for f in plan.functions])
    print("measured cost (queues charged on the planned reservation):")
    _print_cost(reserved)
    print(f"  total with queues charged on measured maxima: {measured.total:.6f}")
    for f in flags:
        print(f"  note: {f}")
    print("overall: " + ("PASS" if all_ok else "FAIL"))
    return EXIT_OK


def _compare_one(spec):
    out = {}
    for method, designer in ((LINEAR, lambda s: build(s, solve_linear(s))),
                             (COMMON_PERIOD, lambda s: build(s, optimize(s)))):
        try:
            out[method] = designer(spec)
        except ValueError as exc:
            out[method] = str(exc)
    return out


def _winner(plans) -> str:
    lin, cp = plans[LINEAR], plans[COMMON_PERIOD]
    if isinstance(lin, str) or isinstance(cp, str):
        return COMMON_PERIOD if isinstance(lin, str) else LINEAR
    a, b = lin.cost.total, cp.cost.total
    if abs(a - b) <= 1e-12 * max(abs(a), abs(b), 1.0):
        return "tie"
    return LINEAR if a < b else COMMON_PERIOD


def _sweep_job(args):
    seed, index = args
    rng = np.random.default_rng([seed, index])
    spec = random_chain(rng, require_residual=False)
    return spec, _compare_one(spec)


def cmd_compare(args) -> int:
    if args.sweep is None:
        if args.config is None:
            _err("compare needs --config or --sweep")
            return EXIT_USAGE
        spec = load_chain(args.config)
        plans = _compare_one(spec)
        print(f"{'':24}{'linear':>16}{'common-period':>16}")
        rows = [("lower bound J_lb", lambda p: p.cost.lower_bound),
                ("compute cost", lambda p: p.cost.compute_cost),
                ("queue cost", lambda p: p.cost.queue_cost),
                ("total cost", lambda p: p.cost.total),
                ("e2e bound [s]", lambda p: p.e2e_bound)]
        for label, get in rows:
            cells = [f"{'n/a':>16}" if isinstance(p, str) else f"{get(p):>16.6f}"
                     for p in (plans[LINEAR], plans[COMMON_PERIOD])]
            print(f"{label:<24}" + "".join(cells))
        for m, p in plans.items():
            if isinstance(p, str):
                print(f"{m}: not applicable ({p})")
        print(f"lower cost: {_winner(plans)}")
        return EXIT_OK

    if args.sweep < 1:
        _err("--sweep needs a positive count")
        return EXIT_USAGE
    jobs = [(args.seed, k) for k in range(args.sweep)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_sweep_job, jobs, chunksize=16))
    else:
        results = [_sweep_job(j) for j in jobs]
    wins = {LINEAR: 0, COMMON_PERIOD: 0, "tie": 0}
    print(f"{'job':>5} {'n':>2} {'rate':>9} {'linear':>12} {'common':>12}  winner")
    for k, (spec, plans) in enumerate(results):
        w = _winner(plans)
        wins[w] += 1
        cells = [f"{'n/a':>12}" if isinstance(p, str) else f"{p.cost.total:>12.6f}"
                 for p in (plans[LINEAR], plans[COMMON_PERIOD])]
        print(f"{k:>5} {len(spec):>2} {spec.input_rate:>9.4f} " + " ".join(cells) + f"  {w}")
    print(f"wins: linear {wins[LINEAR]}, common-period {wins[COMMON_PERIOD]}, tie {wins['tie']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainplan", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"chainplan {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="design a switching plan")
    p.add_argument("--method", choices=METHODS, required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="simulate a plan and check its bounds")
    p.add_argument("--plan", required=True)
    p.add_argument("--periods", type=_positive_int, required=True,
                   help="measured periods after the warm-up")
    p.add_argument("--warmup", type=int, default=None,
                   help="warm-up periods before measuring (default: one per function)")
    p.add_argument("--disturbance", type=_parse_disturbance, action="append", default=[],
                   metavar="i,t,m", help="inject m requests into function i at time t")
    p.add_argument("--dt", type=_positive_float, default=None,
                   help="resample the trace every dt seconds instead of at breakpoints")
    p.add_argument("--trace", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare both designers")
    p.add_argument("--config")
    p.add_argument("--sweep", type=int, default=None, help="number of random chains")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=_positive_int, default=1)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "warmup", None) is not None and args.warmup < 0:
        parser.error("--warmup must be >= 0")
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_VALIDATION
    except OSError as exc:
        _err(f"{exc.filename}: {exc.strerror}")
        return EXIT_VALIDATION
    except ValueError as exc:
        _err(str(exc))
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
