# tests/test_dispatch.py
import numpy as np
import pytest

from src.dispatch.engines import (DispatchState, deterministic_laed, policy_enforcement_ed,
                                  policy_guided_laed)
from src.models.constraints import DispatchHistory
from src.models.power_system import CommitmentSchedule
from src.robust.policy import AffinePolicy
from src.utils.exceptions import DispatchInfeasibleError
from tests import factories


def _case(demand=(95.0, 100.0), storages=None):
    gen = factories.generator(variable_cost=10.0, p_max=200.0, ramp_up=5.0, ramp_down=5.0, startup_ramp=5.0,
                              shutdown_ramp=5.0, initial_output=85.0)
    system = factories.system(list(demand), generators=[gen], renewables=[factories.renewable(p_max=50.0)],
                              storages=storages)
    uset = factories.box_set([[10.0, 10.0]], 2.0, 50.0)
    return system, uset, CommitmentSchedule.all_on(system)


def _policy(system, w_g=(85.0, 100.0), slope=-1.0, w_sm=None):
    S = system.n_storages
    zeros = np.zeros((S, 2))
    return AffinePolicy(w_g=np.array([w_g]), W_g=np.array([[0.0, slope]]), w_sp=zeros, W_sp=zeros,
                        w_sm=zeros if w_sm is None else np.array([w_sm]), W_sm=zeros,
                        w_r=np.zeros((1, 2)), W_r=np.ones(2))


def _first_state(system, lookahead=0):
    return DispatchState(t=0, history=DispatchHistory.empty(system), realized=np.array([[10.0]]),
                         lookahead=lookahead)


def test_policy_enforcement_keeps_room_for_the_next_period(backend):
    system, uset, schedule = _case()
    result = policy_enforcement_ed(system, schedule, _policy(system), uset, _first_state(system), backend=backend)
    # next-period policy output lies in [88, 92]; ramping 5 forces p >= 87
    assert result.dispatch.generation[0, 0] == pytest.approx(87.0)
    assert result.dispatch.renewable[0, 0] == pytest.approx(8.0)
    assert result.penalty_mw == pytest.approx(0.0)
    assert result.dispatch_cost == pytest.approx(870.0)


def test_deterministic_laed_ignores_the_policy(backend):
    system, _, schedule = _case()
    result = deterministic_laed(system, schedule, _first_state(system), np.zeros((1, 0)), backend=backend)
    assert result.dispatch.generation[0, 0] == pytest.approx(85.0)
    assert result.dispatch.renewable[0, 0] == pytest.approx(10.0)


def test_policy_guided_laed_plans_ahead(backend):
    system, uset, schedule = _case()
    result = policy_guided_laed(system, schedule, _policy(system), uset, _first_state(system, lookahead=1),
                                backend=backend)
    assert result.plan.n_periods == 2
    assert result.dispatch.n_periods == 1
    assert result.dispatch.generation[0, 0] == pytest.approx(87.0)


def test_last_period_has_no_robust_rows(backend):
    system, uset, schedule = _case()
    first = policy_enforcement_ed(system, schedule, _policy(system), uset, _first_state(system), backend=backend)
    state = DispatchState(t=1, history=DispatchHistory.empty(system).append(first.dispatch),
                          realized=np.array([[10.0, 10.0]]))
    result = policy_enforcement_ed(system, schedule, _policy(system), uset, state, backend=backend)
    # demand 100 with 10 MW of wind; 90 is within ramp reach of 87
    assert result.dispatch.generation[0, 0] == pytest.approx(90.0)


def test_unreachable_policy_target_is_infeasible(backend):
    system, uset, schedule = _case()
    with pytest.raises(DispatchInfeasibleError) as info:
        policy_enforcement_ed(system, schedule, _policy(system, w_g=(85.0, 150.0), slope=0.0), uset,
                              _first_state(system), backend=backend)
    assert info.value.stage == "policy_enforcement_ed"
    assert any(name.startswith("robust_ramp") for name in info.value.binding_rows)


def test_balance_shortfall_is_penalized(backend):
    system, _, schedule = _case(demand=(300.0, 100.0))
    result = deterministic_laed(system, schedule, _first_state(system), np.zeros((1, 0)), penalty_price=1000.0,
                                backend=backend)
    assert result.penalty_mw == pytest.approx(300.0 - 90.0 - 10.0)
    assert result.penalty_cost == pytest.approx(1000.0 * 200.0)


def test_storage_follows_the_policy_over_the_lookahead(backend):
    system, uset, schedule = _case(storages=[factories.storage()])
    policy = _policy(system, w_sm=[0.0, 5.0])
    result = policy_guided_laed(system, schedule, policy, uset, _first_state(system, lookahead=1), backend=backend)
    plan = result.plan
    net = 0.9 * plan.charge[0].sum() - plan.discharge[0].sum()
    assert net == pytest.approx(0.9 * 5.0)


def test_dispatch_state_validation():
    system, _, _ = _case()
    with pytest.raises(ValueError):
        DispatchState(t=1, history=DispatchHistory.empty(system), realized=np.array([[10.0, 10.0]]))
    with pytest.raises(ValueError):
        DispatchState(t=0, history=DispatchHistory.empty(system), realized=np.array([[10.0, 10.0]]))
    with pytest.raises(ValueError):
        DispatchState(t=0, history=DispatchHistory.empty(system), realized=np.array([[-1.0]]))
    assert _first_state(system, lookahead=5).window_end(system.horizon) == 1
