import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chainplan.fluid import SimulationConfig, simulate
from chainplan.formats import (ConfigError, chain_from_dict, chain_hash, chain_to_dict,
                               dump_plan, load_chain, load_plan, plan_from_dict,
                               plan_to_dict, read_table, save_plan, trace_columns,
                               write_trace)
from chainplan.linear import solve
from chainplan.period import optimize
from chainplan.sampling import random_chain
from chainplan.schedule import build


def test_chain_round_trip(chain, chain_file):
    assert load_chain(chain_file) == chain
    assert chain_from_dict(chain_to_dict(chain)) == chain


def test_unknown_key_is_named(chain):
    doc = chain_to_dict(chain)
    doc["functions"][1]["speed"] = 3
    with pytest.raises(ConfigError, match="speed"):
        chain_from_dict(doc)
    doc = chain_to_dict(chain)
    doc["rate"] = 3
    with pytest.raises(ConfigError, match="rate"):
        chain_from_dict(doc)


@pytest.mark.parametrize("patch", [
    {"input_rate": -1}, {"e2e_deadline": 0}, {"functions": []}, {"input_rate": "17"},
])
def test_invalid_values_rejected(chain, patch):
    doc = {**chain_to_dict(chain), **patch}
    with pytest.raises(ConfigError):
        chain_from_dict(doc)


def test_unreadable_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_chain(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_chain(bad)
    bad.write_text('{"input_rate": NaN, "e2e_deadline": 1, "functions": []}')
    with pytest.raises(ConfigError, match="non-finite"):
        load_chain(bad)


@pytest.mark.parametrize("designer", [solve, optimize])
def test_plan_round_trip(tmp_path, chain, designer):
    plan = build(chain, designer(chain))
    path = tmp_path / "plan.json"
    save_plan(plan, path)
    back = load_plan(path)
    assert back == plan
    assert back.details == plan_to_dict(plan)["details"]
    assert dump_plan(back) == path.read_text()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_plan_round_trip_random(seed):
    spec = random_chain(np.random.default_rng(seed), require_residual=False)
    for plan in (build(spec, optimize(spec)), build(spec, solve(spec))):
        doc = json.loads(dump_plan(plan))
        assert plan_from_dict(doc) == plan


def test_tampered_plan_rejected(chain):
    doc = plan_to_dict(build(chain, optimize(chain)))
    doc["chain"]["input_rate"] = 18.0
    with pytest.raises(ConfigError, match="input_hash"):
        plan_from_dict(doc)
    doc = plan_to_dict(build(chain, optimize(chain)))
    doc["functions"][0]["extra"] = 1
    with pytest.raises(ConfigError, match="extra"):
        plan_from_dict(doc)


def test_hash_is_stable(chain):
    assert chain_hash(chain) == chain_hash(chain_from_dict(chain_to_dict(chain)))
    assert chain_hash(chain) != chain_hash(chain.with_deadline(0.05))


@pytest.mark.parametrize("dt", [None, 0.01])
def test_trace_round_trip(tmp_path, chain, dt):
    trace = simulate(build(chain, optimize(chain)), SimulationConfig(periods=2))
    path = tmp_path / "trace.csv"
    table = write_trace(trace, path, dt)
    back = read_table(path)
    assert list(back) == trace_columns(2)
    for key in table:
        np.testing.assert_array_equal(back[key], table[key])
    if dt is None:
        np.testing.assert_array_equal(back["time"], trace.times)
        np.testing.assert_array_equal(back["e2e_delay"], trace.running_delay())
    else:
        assert np.allclose(np.diff(back["time"])[:-1], dt)
        assert back["time"][-1] == trace.times[-1]
