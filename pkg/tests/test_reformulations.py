# tests/test_reformulations.py
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.models.constraints import dispatch_cost, schedule_values, storage_levels
from src.models.power_system import CommitmentSchedule
from src.robust.policy import Z, AffinePolicy
from src.robust.reformulations import (exact_dual_rows, is_full_dimensional, outer_approximation_rows,
                                       reformulate_energy_balance, reformulate_generation_limits)
from src.robust.robust_constraints import (COST, RobustConstraint, balance_constraints, cost_constraint,
                                           line_constraints, ramp_constraints, storage_constraints)
from src.robust.screening import ScreenOutcome, interval_upper_bound, screen_constraint
from src.solvers.highs_backend import HighsBackend
from src.solvers.program import LinearExpr, MathProgram
from src.uncertainty.dynamic_set import SetExtrema, set_extrema
from tests import factories


def _random_policy(system, rng) -> AffinePolicy:
    G, S, R, T = system.n_generators, system.n_storages, system.n_renewables, system.horizon

    def grid(n, scale):
        return rng.uniform(-scale, scale, size=(n, T))

    return AffinePolicy(grid(G, 100), grid(G, 1), grid(S, 10), grid(S, 1), grid(S, 10), grid(S, 1),
                        grid(R, 10), rng.uniform(0, 1, size=T))


def _master_values(system, policy, z=0.0):
    values = schedule_values(CommitmentSchedule.all_on(system))
    values.update(policy.variable_values())
    values[Z] = z
    return values


def _storage_system():
    gen = factories.generator(ramp_up=30.0, startup_ramp=40.0, ramp_down=25.0, shutdown_ramp=35.0,
                              initial_output=50.0)
    return factories.system([100.0, 120.0, 90.0], generators=[gen, factories.generator("G2", variable_cost=35.0)],
                            renewables=[factories.renewable("W1"), factories.renewable("W2")],
                            storages=[factories.storage()])


# --- robust rows evaluated at a scenario ---

@given(seed=st.integers(0, 10_000))
def test_cost_row_measures_dispatch_cost_minus_z(seed):
    system = _storage_system()
    rng = np.random.default_rng(seed)
    policy = _random_policy(system, rng)
    available = rng.uniform(0, 100, size=(2, 3))
    values = _master_values(system, policy, z=1234.0)
    rc = cost_constraint(system)
    expected = dispatch_cost(system, policy.dispatch(available)) - 1234.0
    assert rc.lhs_at(values, available) - rc.bound(values) == pytest.approx(expected, rel=1e-9, abs=1e-6)


@given(seed=st.integers(0, 10_000))
def test_ramp_rows_measure_ramp_excess(seed):
    system = _storage_system()
    rng = np.random.default_rng(seed)
    policy = _random_policy(system, rng)
    available = rng.uniform(0, 100, size=(2, 3))
    values = _master_values(system, policy)
    p = policy.dispatch(available).generation[0]
    rows = {rc.name: rc for rc in ramp_constraints(system)}

    def excess(name):
        rc = rows[name]
        return rc.lhs_at(values, available) - rc.bound(values)

    # all on from an on state: plain ramp limits
    assert excess("ramp_up(0,0)") == pytest.approx(p[0] - 50.0 - 30.0)
    assert excess("ramp_down(0,0)") == pytest.approx(50.0 - p[0] - 25.0)
    assert excess("ramp_up(0,2)") == pytest.approx(p[2] - p[1] - 30.0)
    assert excess("ramp_down(0,2)") == pytest.approx(p[1] - p[2] - 25.0)


@given(seed=st.integers(0, 10_000))
def test_storage_and_balance_rows(seed):
    system = _storage_system()
    rng = np.random.default_rng(seed)
    policy = _random_policy(system, rng)
    available = rng.uniform(0, 100, size=(2, 3))
    values = _master_values(system, policy)
    dispatch = policy.dispatch(available)
    levels = storage_levels(system, dispatch)[0]
    rows = {rc.name: rc for rc in storage_constraints(system) + balance_constraints(system)}

    def excess(name):
        return rows[name].lhs_at(values, available) - rows[name].bound(values)

    for t in range(3):
        assert excess(f"storage_max(0,{t})") == pytest.approx(levels[t] - 40.0)
        assert excess(f"storage_min(0,{t})") == pytest.approx(-levels[t])
        supply = (dispatch.generation[:, t].sum() + dispatch.renewable[:, t].sum()
                  + dispatch.discharge[0, t] - dispatch.charge[0, t])
        assert excess(f"balance_hi({t})") == pytest.approx(supply - system.total_demand[t])
        assert excess(f"balance_lo({t})") == pytest.approx(system.total_demand[t] - supply)


def test_line_rows_measure_flow_over_limit(three_bus):
    rng = np.random.default_rng(4)
    policy = _random_policy(three_bus, rng)
    available = rng.uniform(0, 50, size=(three_bus.n_renewables, three_bus.horizon))
    values = _master_values(three_bus, policy)
    dispatch = policy.dispatch(available)
    rows = {rc.name: rc for rc in line_constraints(three_bus)}
    for l in range(three_bus.n_lines):
        t = 1
        flow = (three_bus.alpha_generator[l] @ dispatch.generation[:, t]
                + three_bus.alpha_renewable[l] @ dispatch.renewable[:, t] - three_bus.demand_flow[l, t])
        if three_bus.n_storages:
            flow += three_bus.alpha_storage[l] @ (dispatch.discharge[:, t] - dispatch.charge[:, t])
        rc = rows[f"line_max({l},{t})"]
        assert rc.lhs_at(values, available) - rc.bound(values) == pytest.approx(flow - three_bus.flow_limit[l])


def test_cut_is_the_row_at_the_scenario():
    system = _storage_system()
    policy = _random_policy(system, np.random.default_rng(0))
    values = _master_values(system, policy, z=0.0)
    available = np.full((2, 3), 30.0)
    rc = cost_constraint(system)
    cut = rc.cut(available, "_0")
    assert cut.kind == "robust_cut"
    expected = max(0.0, rc.lhs_at(values, available) - rc.bound(values))
    assert cut.violation(values) == pytest.approx(expected, rel=1e-9, abs=1e-6)


def test_scenario_pool_ignores_duplicates():
    rc = cost_constraint(_storage_system())
    scenario = np.full((2, 3), 30.0)
    assert rc.add_scenario(scenario)
    assert not rc.add_scenario(scenario + 1e-12)
    assert rc.add_scenario(scenario + 1.0)
    assert len(rc.pool) == 2


# --- screening ---

def test_interval_bound_by_sign():
    weights = np.array([[1.0, -2.0]])
    assert interval_upper_bound(weights, np.array([[0.0, 1.0]]), np.array([[3.0, 5.0]])) == pytest.approx(1.0)
    assert screen_constraint(weights, 1.0, np.array([[0.0, 1.0]]), np.array([[3.0, 5.0]])) \
        is ScreenOutcome.CERTIFIED
    assert screen_constraint(weights, 0.5, np.array([[0.0, 1.0]]), np.array([[3.0, 5.0]])) \
        is ScreenOutcome.NEEDS_LP


@given(seed=st.integers(0, 10_000))
def test_screening_never_certifies_a_violated_row(seed):
    uset = factories.lagged_set(n_units=2, horizon=3, rho=0.5)
    ext = set_extrema(uset)
    weights = np.random.default_rng(seed).normal(size=(2, 3))
    worst, _ = uset.maximize_linear(weights)
    assert interval_upper_bound(weights, ext.unit_min, ext.unit_max) >= worst - 1e-7


# --- deterministic reformulations ---

def test_generation_limit_rows_check_both_ends():
    system = factories.system([100.0], renewables=[factories.renewable()])
    uset = factories.box_set([[10.0]], 2.0, 100.0, gamma=1.0)
    rows = reformulate_generation_limits(system, set_extrema(uset))
    base = dict(schedule_values(CommitmentSchedule.all_on(system)), **{"wr(0,0)": 0.0, "Wr(0)": 1.0})

    def satisfied(w, W):
        values = dict(base, **{"wg(0,0)": w, "Wg(0,0)": W})
        return all(row.violation(values) <= 1e-9 for row in rows)

    # total availability ranges over [8, 12]; p_max 500
    assert satisfied(490.0, 0.5)
    assert not satisfied(490.0, 1.0)
    assert not satisfied(-5.0, 0.5)


def test_degenerate_extrema_need_half_the_limit_rows():
    system = factories.system([100.0], renewables=[factories.renewable()])

    def extrema(lo, hi):
        return SetExtrema(total_min=np.array([lo]), total_max=np.array([hi]), delta_min=np.zeros(0),
                          delta_max=np.zeros(0), unit_min=np.array([[lo]]), unit_max=np.array([[hi]]))

    spread = reformulate_generation_limits(system, extrema(8.0, 12.0))
    flat = reformulate_generation_limits(system, extrema(10.0, 10.0))
    assert len(flat) * 2 == len(spread)


def test_limit_rows_reject_mismatched_extrema():
    system = factories.system([100.0, 100.0], renewables=[factories.renewable()])
    with pytest.raises(ValueError):
        reformulate_generation_limits(system, set_extrema(factories.box_set([[10.0]], 2.0, 100.0)))
    with pytest.raises(ValueError):
        reformulate_generation_limits(system, None)


def test_full_dimension_check():
    assert is_full_dimensional(factories.box_set([[10.0, 10.0]], 2.0, 100.0),
                               set_extrema(factories.box_set([[10.0, 10.0]], 2.0, 100.0)))
    flat = factories.box_set([[10.0, 10.0]], 2.0, 100.0, gamma=0.0)
    assert not is_full_dimensional(flat, set_extrema(flat))


def test_energy_balance_equalities():
    system = factories.system([100.0, 80.0], renewables=[factories.renewable()], storages=[factories.storage()])
    rows = reformulate_energy_balance(system)
    assert [row.name for row in rows] == ["balance_intercept(0)", "balance_slope(0)",
                                         "balance_intercept(1)", "balance_slope(1)"]
    assert rows[0].rhs == 100.0 and rows[1].rhs == 0.0


def _toy_row(coeffs, unit_coeffs=None) -> RobustConstraint:
    return RobustConstraint("toy", COST, {t: LinearExpr(constant=c) for t, c in coeffs.items()},
                            LinearExpr({"z": 1.0}),
                            {k: LinearExpr(constant=c) for k, c in (unit_coeffs or {}).items()})


def _min_z(rows_for) -> float:
    program = MathProgram("dual_check")
    program.add_free_variable("z")
    program.add_rows(rows_for(program))
    program.set_objective({"z": 1.0})
    return HighsBackend().solve(program).objective


def test_outer_approximation_uses_delta_bounds():
    extrema = SetExtrema(total_min=np.array([0.0, 0.0]), total_max=np.array([10.0, 10.0]),
                         delta_min=np.array([-1.0]), delta_max=np.array([1.0]),
                         unit_min=np.zeros((1, 2)), unit_max=np.full((1, 2), 10.0))
    # max total_0 - total_1 over the box alone is 10; the delta bound cuts it to 1
    assert _min_z(lambda p: outer_approximation_rows(_toy_row({0: 1.0, 1: -1.0}), extrema, p)) \
        == pytest.approx(1.0)
    assert _min_z(lambda p: outer_approximation_rows(_toy_row({0: 1.0, 1: 1.0}), extrema, p)) \
        == pytest.approx(20.0)


def test_outer_approximation_needs_total_only_rows():
    extrema = set_extrema(factories.box_set([[10.0]], 2.0, 100.0))
    with pytest.raises(ValueError):
        outer_approximation_rows(_toy_row({0: 1.0}, {(0, 0): 1.0}), extrema, MathProgram("p"))


def test_exact_dual_matches_the_separation_lp():
    uset = factories.box_set([[10.0, 12.0], [5.0, 5.0]], [[2.0, 2.0], [1.0, 1.0]], 50.0)
    rc = _toy_row({0: 1.0, 1: -0.5}, {(0, 1): 2.0})
    worst, _ = uset.maximize_linear(rc.weights({}, 2, 2))
    assert _min_z(lambda p: exact_dual_rows(rc, uset, p)) == pytest.approx(worst)
