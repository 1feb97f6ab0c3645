import math

import pytest
from hypothesis import given, strategies as st

from chainplan.model import (ChainSpec, CostBreakdown, FunctionSpec, derive_profile,
                             derive_profiles, lower_bound_cost, periodic_compute_cost,
                             queue_cost, split_rate)


def test_split_rate_reference_values():
    assert split_rate(17, 6) == (2, pytest.approx(5 / 6))
    assert split_rate(17, 8) == (2, pytest.approx(1 / 8))
    assert split_rate(17, 17) == (1, 0.0)


def test_split_rate_snaps_float_noise():
    # 17 / (17/3) is 3.0000000000000004 in binary floating point
    assert split_rate(17, 17 / 3) == (3, 0.0)
    m, rho = split_rate(3.0 - 1e-13, 1.0)
    assert (m, rho) == (3, 0.0)


@given(st.floats(0.01, 1e6), st.floats(0.01, 1e3))
def test_split_rate_reconstructs_rate(rate, speed):
    m, rho = split_rate(rate, speed)
    assert m >= 0 and 0 <= rho < 1
    assert (m + rho) * speed == pytest.approx(rate, rel=1e-8)


def test_profiles_of_reference_chain(chain):
    p1, p2 = derive_profiles(chain)
    assert p1.always_on_machines == 2 and p2.always_on_machines == 2
    assert p1.threshold_period == pytest.approx(0.06)
    assert p2.threshold_period == pytest.approx(0.01 / 0.875)
    assert lower_bound_cost(chain) == pytest.approx(34.0)
    assert p1.lb_cost_share + p2.lb_cost_share == pytest.approx(34.0)


def test_exact_fit_has_no_switching():
    spec = ChainSpec(16.0, 0.1, [FunctionSpec(8.0, 8.0, 0.5, 0.01)])
    p = derive_profile(spec, 0)
    assert not p.switches
    assert p.threshold_period == pytest.approx(0.01)
    assert periodic_compute_cost(p, spec.functions[0], 0.3) == 16.0


def test_periodic_cost_regimes(chain):
    p, fn = derive_profile(chain, 0), chain.functions[0]
    assert periodic_compute_cost(p, fn, 0.0) == 18.0
    assert periodic_compute_cost(p, fn, 0.05) == 18.0
    T = 0.25
    assert periodic_compute_cost(p, fn, T) == pytest.approx(6 * (2 + 5 / 6 + 0.01 / T))
    with pytest.raises(ValueError):
        periodic_compute_cost(p, fn, -1.0)


# subnormal delays lose the precision of delay / threshold, so start at 1e-9
@given(st.floats(1.0, 50.0), st.floats(1.0, 20.0),
       st.just(0.0) | st.floats(1e-9, 0.05))
def test_periodic_cost_continuous_at_threshold_and_above_bound(rate, speed, delay):
    spec = ChainSpec(rate, 1.0, [FunctionSpec(speed, 3.0, 1.0, delay)])
    p, fn = derive_profile(spec, 0), spec.functions[0]
    if p.switches and delay > 0:
        at = periodic_compute_cost(p, fn, p.threshold_period)
        assert at == pytest.approx(3.0 * (p.always_on_machines + 1))
    for T in (0.0, 0.01, 1.0, 100.0):
        assert periodic_compute_cost(p, fn, T) >= p.lb_cost_share * (1 - 1e-12)


def test_validation_errors():
    with pytest.raises(ValueError, match="nominal_speed"):
        FunctionSpec(0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError, match="switch_delay"):
        FunctionSpec(1.0, 1.0, 1.0, -0.1)
    with pytest.raises(ValueError, match="input_rate"):
        ChainSpec(0.0, 1.0, [FunctionSpec(1.0, 1.0, 1.0, 0.0)])
    with pytest.raises(ValueError, match="at least one"):
        ChainSpec(1.0, 1.0, [])
    with pytest.raises(ValueError):
        queue_cost(FunctionSpec(1.0, 1.0, 1.0, 0.0), -1.0)


def test_cost_breakdown_arithmetic():
    a = CostBreakdown(1.0, 2.0, 0.5)
    b = a + CostBreakdown(3.0, 0.25, 1.0)
    assert b == CostBreakdown(4.0, 2.25, 1.5)
    assert b.total == 6.25


def test_chain_helpers(chain):
    assert len(chain) == 2
    doubled = chain.scaled_costs(2.0)
    assert doubled.functions[1].compute_cost_rate == 16.0
    assert lower_bound_cost(doubled) == pytest.approx(68.0)
    assert chain.with_deadline(0.05).e2e_deadline == 0.05
    assert math.isclose(chain.with_deadline(0.05).input_rate, 17.0)
