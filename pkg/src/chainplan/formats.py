"""Chain config, plan and trace files.

Configs and plans are JSON. Floats are written with ``repr`` precision, so
reading a file back reproduces every value bit for bit. Traces are CSV with
one row per breakpoint (or per fixed step).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .model import ChainSpec, CostBreakdown, FunctionSpec
from .schedule import METHODS, FunctionSchedule, SwitchingPlan

PLAN_FORMAT = "chainplan.plan/1"


class ConfigError(ValueError):
    """A config or plan document failed validation."""


_NUMBER = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_POS = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["input_rate", "e2e_deadline", "functions"],
    "properties": {
        "input_rate": _POS,
        "e2e_deadline": _POS,
        "functions": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["nominal_speed", "compute_cost", "queue_cost", "switch_delay"],
                "properties": {
                    "nominal_speed": _POS,
                    "compute_cost": _NONNEG,
                    "queue_cost": _NONNEG,
                    "switch_delay": _NONNEG,
                },
            },
        },
    },
}

_SCHEDULE_KEYS = ("period", "on_duration", "onset", "off_instant", "qmax",
                  "always_on", "always_on_machines", "residual_rate")

PLAN_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["format", "tool_version", "method", "input_hash", "chain",
                 "e2e_bound", "cost", "functions", "details"],
    "properties": {
        "format": {"const": PLAN_FORMAT},
        "tool_version": {"type": "string"},
        "method": {"enum": list(METHODS)},
        "input_hash": {"type": "string"},
        "chain": CONFIG_SCHEMA,
        "e2e_bound": _NUMBER,
        "cost": {
            "type": "object",
            "additionalProperties": False,
            "required": ["compute_cost", "queue_cost", "lower_bound", "total"],
            "properties": {k: _NUMBER for k in
                           ("compute_cost", "queue_cost", "lower_bound", "total")},
        },
        "functions": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": list(_SCHEDULE_KEYS),
                "properties": {
                    "period": _NONNEG, "on_duration": _NONNEG, "onset": _NONNEG,
                    "off_instant": _NONNEG, "qmax": _NONNEG,
                    "always_on": {"type": "boolean"},
                    "always_on_machines": {"type": "integer", "minimum": 0},
                    "residual_rate": _NONNEG,
                },
            },
        },
        "details": {"type": "object"},
    },
}


def _validate(doc, schema, what: str) -> None:
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid {what} at {where}: {exc.message}") from None


def _reject_non_finite(token):
    raise ConfigError(f"non-finite number {token!r} is not allowed")


def _load_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text, parse_constant=_reject_non_finite)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from None


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def chain_to_dict(spec: ChainSpec) -> dict:
    return {
        "input_rate": spec.input_rate,
        "e2e_deadline": spec.e2e_deadline,
        "functions": [
            {"nominal_speed": f.nominal_speed, "compute_cost": f.compute_cost_rate,
             "queue_cost": f.queue_cost_rate, "switch_delay": f.switch_delay}
            for f in spec.functions
        ],
    }


def chain_from_dict(doc: dict) -> ChainSpec:
    _validate(doc, CONFIG_SCHEMA, "chain config")
    fns = [FunctionSpec(float(f["nominal_speed"]), float(f["compute_cost"]),
                        float(f["queue_cost"]), float(f["switch_delay"]))
           for f in doc["functions"]]
    return ChainSpec(float(doc["input_rate"]), float(doc["e2e_deadline"]), fns)


def load_chain(path) -> ChainSpec:
    return chain_from_dict(_load_json(path))


def save_chain(spec: ChainSpec, path) -> None:
    Path(path).write_text(_dumps(chain_to_dict(spec)))


def chain_hash(spec: ChainSpec) -> str:
    canon = json.dumps(chain_to_dict(spec), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(canon.encode()).hexdigest()


def _plain(value):
    """Convert numpy scalars and containers to JSON-native values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def plan_to_dict(plan: SwitchingPlan) -> dict:
    return {
        "format": PLAN_FORMAT,
        "tool_version": __version__,
        "method": plan.method,
        "input_hash": chain_hash(plan.spec),
        "chain": chain_to_dict(plan.spec),
        "e2e_bound": plan.e2e_bound,
        "cost": {"compute_cost": plan.cost.compute_cost, "queue_cost": plan.cost.queue_cost,
                 "lower_bound": plan.cost.lower_bound, "total": plan.cost.total},
        "functions": [
            {"period": f.period, "on_duration": f.on_duration, "onset": f.onset,
             "off_instant": f.off_instant, "qmax": f.qmax, "always_on": f.always_on,
             "always_on_machines": f.always_on_machines, "residual_rate": f.residual_rate}
            for f in plan.functions
        ],
        "details": _plain(plan.details),
    }


def plan_from_dict(doc: dict) -> SwitchingPlan:
    _validate(doc, PLAN_SCHEMA, "plan")
    spec = chain_from_dict(doc["chain"])
    if doc["input_hash"] != chain_hash(spec):
        raise ConfigError("plan input_hash does not match its chain")
    if len(doc["functions"]) != len(spec):
        raise ConfigError("plan has a different number of functions than its chain")
    fns = tuple(FunctionSchedule(float(f["period"]), float(f["on_duration"]),
                                 float(f["onset"]), float(f["qmax"]), bool(f["always_on"]),
                                 int(f["always_on_machines"]), float(f["residual_rate"]))
                for f in doc["functions"])
    c = doc["cost"]
    cost = CostBreakdown(float(c["compute_cost"]), float(c["queue_cost"]),
                         float(c["lower_bound"]))
    return SwitchingPlan(spec, doc["method"], fns, float(doc["e2e_bound"]), cost,
                         dict(doc["details"]))


def dump_plan(plan: SwitchingPlan) -> str:
    return _dumps(plan_to_dict(plan))


def save_plan(plan: SwitchingPlan, path) -> None:
    Path(path).write_text(dump_plan(plan))


def load_plan(path) -> SwitchingPlan:
    return plan_from_dict(_load_json(path))


def trace_columns(n: int) -> list[str]:
    cols = ["time"]
    cols += [f"q{i + 1}" for i in range(n)]
    cols += [f"m{i + 1}" for i in range(n)]
    cols += [f"s{i + 1}" for i in range(n)]
    cols.append("e2e_delay")
    return cols


def trace_table(trace, dt: float | None = None) -> dict[str, np.ndarray]:
    """Columns of a trace, at breakpoints or resampled every ``dt`` seconds."""
    n = trace.n_functions
    if dt is None:
        times = trace.times
        q = trace.queues
        idx = np.arange(len(times))
        served_n = trace.served[:, -1]
    else:
        if not dt > 0:
            raise ValueError("dt must be positive")
        end = trace.times[-1]
        times = np.arange(0.0, end, dt)
        times = np.append(times, end) if times[-1] < end else times
        q = trace.queue_at(times)
        idx = trace.segment_index(times)
        served_n = np.interp(times, trace.times, trace.served[:, -1])
    table = {"time": times}
    for i in range(n):
        table[f"q{i + 1}"] = q[:, i]
    for i in range(n):
        table[f"m{i + 1}"] = trace.machines[idx, i]
    for i in range(n):
        table[f"s{i + 1}"] = trace.rates[idx, i]
    table["e2e_delay"] = times - served_n / trace.input_rate
    return table


def write_table(table: dict[str, np.ndarray], path) -> None:
    cols = list(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*(table[c] for c in cols)):
            w.writerow([repr(int(v)) if isinstance(v, (np.integer, int)) else repr(float(v))
                        for v in row])


def read_table(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols, body = rows[0], rows[1:]
    out = {}
    for j, c in enumerate(cols):
        vals = [r[j] for r in body]
        if c.startswith("m") and c[1:].isdigit():
            out[c] = np.array([int(v) for v in vals], dtype=int)
        else:
            out[c] = np.array([float(v) for v in vals])
    return out


def write_trace(trace, path, dt: float | None = None) -> dict[str, np.ndarray]:
    table = trace_table(trace, dt)
    write_table(table, path)
    return table
