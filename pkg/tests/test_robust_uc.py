# tests/test_robust_uc.py
from dataclasses import replace

import numpy as np
import pytest

from src.config.settings import settings
from src.dispatch.det_uc import solve_deterministic_uc
from src.models.power_system import PowerSystem
from src.robust.engine import (RobustUcOptions, UcSolution, _add_cuts, _Separator, exact_worst_case_cost,
                               solve_robust_uc, verify_solution)
from src.robust.robust_constraints import cost_constraint
from src.solvers.lp_format import read_lp
from src.uncertainty.sampling import sample_members
from src.utils.exceptions import ConfigError, InfeasibleError, UncertaintySetError
from src.workflows import pipeline
from tests import factories

TIGHT = RobustUcOptions(mip_gap=1e-6)


@pytest.fixture
def box_case():
    system = factories.system([100.0, 120.0], renewables=[factories.renewable(p_max=100.0)])
    uset = factories.box_set([[30.0, 40.0]], 5.0, 100.0, gamma=1.0)
    return system, uset


def _ramped_case():
    gens = [factories.generator("G1", ramp_up=15.0, ramp_down=15.0, startup_ramp=15.0, shutdown_ramp=15.0,
                                initial_output=80.0),
            factories.generator("G2", variable_cost=50.0, no_load_cost=5.0, initial_on=False, initial_output=0.0)]
    system = factories.system([100.0, 110.0, 105.0], generators=gens,
                              renewables=[factories.renewable("W1"), factories.renewable("W2")],
                              storages=[factories.storage()])
    uset = factories.lagged_set(n_units=2, horizon=3, a=0.5, rho=0.5, norm="l1_linf", f=20.0, g=3.0)
    return system, uset


def test_box_set_worst_case_is_the_lowest_availability(box_case, backend):
    system, uset = box_case
    solution = solve_robust_uc(system, uset, TIGHT, backend)
    # generation covers demand minus the lowest renewable output in each period
    expected = 20.0 * ((100.0 - 25.0) + (120.0 - 35.0))
    assert solution.worst_case_cost == pytest.approx(expected, rel=1e-5)
    assert solution.commitment_cost == pytest.approx(0.0)
    assert solution.stats.certified
    assert solution.stats.balance_mode == "exact"
    assert verify_solution(system, uset, solution, backend) == {}
    assert exact_worst_case_cost(system, uset, solution.policy, backend) == pytest.approx(expected, rel=1e-5)


def test_zero_gamma_matches_deterministic_uc(one_bus, backend):
    forecast = np.array([[40.0, 35.0, 30.0, 20.0, 25.0, 45.0]])
    uset = factories.box_set(forecast, 5.0, one_bus.renewable_p_max, gamma=0.0)
    robust = solve_robust_uc(one_bus, uset, TIGHT, backend)
    deterministic = solve_deterministic_uc(one_bus, forecast, backend=backend)
    assert robust.stats.balance_mode == "cg"
    assert robust.total_cost == pytest.approx(deterministic.total_cost, rel=1e-4)
    assert deterministic.label == "deterministic"


def test_constraint_generation_matches_monolithic_reformulation(backend):
    system, uset = _ramped_case()
    by_cuts = solve_robust_uc(system, uset, RobustUcOptions(mip_gap=1e-6, outer_approx=False), backend)
    monolithic = solve_robust_uc(system, uset, RobustUcOptions(mip_gap=1e-6, reformulation="monolithic"),
                                 backend)
    assert by_cuts.total_cost == pytest.approx(monolithic.total_cost, rel=1e-4)
    assert by_cuts.stats.certified and by_cuts.stats.cuts_added > 0


def test_outer_approximation_is_conservative(backend):
    system, uset = _ramped_case()
    exact = solve_robust_uc(system, uset, RobustUcOptions(mip_gap=1e-6, outer_approx=False), backend)
    approx = solve_robust_uc(system, uset, TIGHT, backend)
    assert approx.total_cost >= exact.total_cost * (1 - 1e-4)
    assert verify_solution(system, uset, approx, backend) == {}


def test_screening_and_parking_do_not_change_the_optimum(backend):
    system, uset = _ramped_case()
    plain = RobustUcOptions(mip_gap=1e-6, outer_approx=False, screening=False, loose_strategy=False)
    fast = RobustUcOptions(mip_gap=1e-6, outer_approx=False)
    a = solve_robust_uc(system, uset, plain, backend)
    b = solve_robust_uc(system, uset, fast, backend)
    assert a.total_cost == pytest.approx(b.total_cost, rel=1e-4)
    assert a.stats.lps_screened == 0


def test_unserveable_demand_is_reported_as_robust_rows(backend):
    system = factories.system([900.0], renewables=[factories.renewable()])
    uset = factories.box_set([[10.0]], 2.0, 100.0)
    with pytest.raises(InfeasibleError) as info:
        solve_robust_uc(system, uset, TIGHT, backend)
    assert info.value.stage == "robust_rows"


def test_input_mismatches_are_rejected(box_case, backend):
    system, _ = box_case
    with pytest.raises(ConfigError):
        solve_robust_uc(system, factories.box_set([[30.0, 40.0, 50.0]], 5.0, 100.0), TIGHT, backend)
    with pytest.raises(ConfigError):
        solve_robust_uc(system, factories.box_set([[30.0, 40.0], [1.0, 1.0]], 5.0, 100.0), TIGHT, backend)
    with pytest.raises(UncertaintySetError):
        solve_robust_uc(system, factories.box_set([[30.0, 40.0]], 5.0, 100.0, norm="l2"), TIGHT, backend)


def test_verification_flags_a_tampered_policy(box_case, backend):
    system, uset = box_case
    solution = solve_robust_uc(system, uset, TIGHT, backend)
    solution.policy.w_g[0, 0] += 50.0
    violations = verify_solution(system, uset, solution, backend)
    assert "balance_hi(0)" in violations


def test_solution_file_round_trip(box_case, backend, tmp_path):
    system, uset = box_case
    solution = solve_robust_uc(system, uset, TIGHT, backend)
    path = solution.save("robust_solution", tmp_path)
    again = UcSolution.load(system, path)
    assert again.total_cost == pytest.approx(solution.total_cost)
    np.testing.assert_array_equal(again.schedule.x_on, solution.schedule.x_on)
    np.testing.assert_allclose(again.policy.W_g, solution.policy.W_g)
    assert again.stats.certified


def test_options_follow_settings():
    tuned = settings.with_overrides(MIP_GAP=0.02, SCREENING=False)
    options = RobustUcOptions.from_settings(tuned, one_tree=False)
    assert options.mip_gap == 0.02 and not options.screening and not options.one_tree
    with pytest.raises(ValueError):
        RobustUcOptions(mip_gap=0.0)


# --- growth in gamma ---

def test_cost_is_nondecreasing_in_gamma(backend):
    system, _ = _ramped_case()
    costs = []
    for gamma in (0.5, 1.0, 2.0):
        uset = factories.lagged_set(n_units=2, horizon=3, a=0.5, gamma=gamma, rho=0.5, norm="l1_linf",
                                    f=20.0, g=3.0)
        costs.append(solve_robust_uc(system, uset, TIGHT, backend).total_cost)
    for smaller, larger in zip(costs, costs[1:]):
        assert larger >= smaller * (1 - 1e-5)


@pytest.mark.parametrize("system_file, model_file", [("one_bus.yaml", "wind_model.json"),
                                                     ("three_bus.yaml", "wind_model.json"),
                                                     ("six_bus.yaml", "six_bus_model.json")])
def test_bundled_cost_is_nondecreasing_in_gamma(system_file, model_file, data_dir, run_settings, backend):
    tuned = run_settings.with_overrides(MIP_GAP=1e-3)
    system = PowerSystem.from_file(data_dir / system_file)
    model = pipeline.load_model(data_dir / model_file)
    options = RobustUcOptions.from_settings(tuned)
    costs = [solve_robust_uc(system, pipeline.build_uncertainty_set(system, model, tuned, gamma=gamma), options,
                             backend).total_cost
             for gamma in (0.5, 1.0, 2.0)]
    for smaller, larger in zip(costs, costs[1:]):
        assert larger >= smaller * (1 - 2e-3)


# --- energy balance over sampled set members ---

def _imbalance(system, policy, available) -> np.ndarray:
    d = policy.dispatch(available)
    supply = d.generation.sum(axis=0) + d.renewable.sum(axis=0) + d.discharge.sum(axis=0) - d.charge.sum(axis=0)
    return supply - system.total_demand


def test_policy_balances_every_sampled_member(backend):
    system, uset = _ramped_case()
    solution = solve_robust_uc(system, uset, TIGHT, backend)
    assert solution.stats.balance_mode == "exact"
    members = sample_members(uset, 1000, np.random.default_rng(5), backend)
    largest_total = max(m.sum(axis=0).max() for m in members)
    # equality rows hold to the LP feasibility tolerance, scaled by the total availability
    tol = 1e-6 * (1.0 + largest_total)
    assert max(np.abs(_imbalance(system, solution.policy, m)).max() for m in members) <= tol

    def shifted_worst(delta):
        policy = replace(solution.policy, W_r=solution.policy.W_r + delta)
        return max(np.abs(_imbalance(system, policy, m)).max() for m in members)

    base = shifted_worst(0.01)
    assert base == pytest.approx(0.01 * largest_total, abs=tol)
    assert shifted_worst(0.02) == pytest.approx(2 * base, abs=3 * tol)
    assert shifted_worst(0.04) == pytest.approx(4 * base, abs=5 * tol)


# --- constraint generation bookkeeping ---

def test_violations_at_pooled_scenarios_are_reported(box_case):
    system, uset = box_case
    rc = cost_constraint(system)
    scenario = uset.forecast_path().available
    rows, pooled = _add_cuts(None, [(rc, scenario)])
    assert len(rows) == 1 and pooled == []
    rows, pooled = _add_cuts(None, [(rc, scenario.copy())])
    assert rows == [] and pooled == [rc.name]


def test_rows_are_not_rechecked_at_the_same_master_values(backend, monkeypatch):
    checked = []
    run = _Separator.run

    def recording(self, rows, values, park):
        key = tuple(sorted(values.items()))
        checked.extend((rc.name, key) for rc in rows)
        return run(self, rows, values, park)

    monkeypatch.setattr(_Separator, "run", recording)
    system, uset = _ramped_case()
    solution = solve_robust_uc(system, uset, RobustUcOptions(mip_gap=1e-6, outer_approx=False, screening=False),
                               backend)
    assert solution.stats.certified
    assert len(checked) == len(set(checked))


def test_infeasible_master_is_dumped_as_lp(backend, tmp_path):
    system = factories.system([900.0], renewables=[factories.renewable()])
    uset = factories.box_set([[10.0]], 2.0, 100.0)
    with pytest.raises(InfeasibleError):
        solve_robust_uc(system, uset, RobustUcOptions(mip_gap=1e-6, lp_dump_dir=str(tmp_path)), backend)
    dumped = read_lp((tmp_path / "robust_uc_master.lp").read_text())
    assert dumped.name == "robust_uc_master" and len(dumped.rows) > 0
    tuned = settings.with_overrides(LP_DUMP_DIR=str(tmp_path))
    assert RobustUcOptions.from_settings(tuned).lp_dump_dir == str(tmp_path)
