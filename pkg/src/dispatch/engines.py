# src/dispatch/engines.py
"""
Real-time economic dispatch engines. Each solves one LP at period t with
the commitment fixed, given what has been realized so far:

- policy-guided look-ahead ED: periods t..t+T', robust ramping from t to
  t+1 against the affine policy, and storage increments that follow the
  policy over the look-ahead;
- policy-enforcement ED: period t plus the robust ramping rows;
- deterministic look-ahead ED: periods t..t+T' on the forecast.

Balance and line rows carry penalty slacks, so only the hard rows
(ramping, storage) can make an ED infeasible.
"""
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np

from src.models.constraints import (CHA, DIS, GEN, Dispatch, DispatchHistory, DispatchWindow, dispatch_cost,
                                    dispatch_window)
from src.models.power_system import CommitmentSchedule, PowerSystem
from src.robust.policy import AffinePolicy
from src.solvers.base import SolverBackend, SolveStatus
from src.solvers.highs_backend import HighsBackend
from src.solvers.program import LinearExpr, LinearRow, MathProgram, Sense, var_name
from src.uncertainty.dynamic_set import DynamicUncertaintySet, conditioned_total_range
from src.uncertainty.sampling import conditional_forecast
from src.utils.exceptions import BackendError, DispatchInfeasibleError

HARD_KINDS = ("ramp", "storage_energy", "storage_bound", "robust_ramp", "storage_match")


class EdEngine(str, Enum):
    POLICY_GUIDED = "policy_guided"
    POLICY_ENFORCEMENT = "policy_enforcement"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class DispatchState:
    """What is known at period t: realized dispatch of 0..t-1 and availability of 0..t."""

    t: int
    history: DispatchHistory
    realized: np.ndarray  # renewable x (t+1)
    lookahead: int = 3

    def __post_init__(self):
        realized = np.atleast_2d(np.asarray(self.realized, dtype=float))
        object.__setattr__(self, "realized", realized)
        if self.history.periods != self.t:
            raise ValueError(f"history covers {self.history.periods} periods, expected {self.t}")
        if realized.shape[1] != self.t + 1:
            raise ValueError(f"realized availability has {realized.shape[1]} periods, expected {self.t + 1}")
        if self.lookahead < 0:
            raise ValueError("lookahead must be >= 0")
        if np.any(realized < 0):
            raise ValueError("realized availability must be nonnegative")

    def window_end(self, horizon: int) -> int:
        return min(self.t + self.lookahead, horizon - 1)


@dataclass
class EdResult:
    """Implemented dispatch of period t plus the look-ahead plan (period t included)."""

    dispatch: Dispatch
    plan: Dispatch
    penalty_mw: float
    penalty_cost: float
    dispatch_cost: float
    objective: float


def _window_availability(state: DispatchState, stop: int, forecast: np.ndarray) -> np.ndarray:
    """Realized column at t, forecast columns for t+1..stop."""
    ahead = stop - state.t
    columns = [state.realized[:, -1:]]
    if ahead:
        columns.append(np.asarray(forecast, dtype=float).reshape(state.realized.shape[0], -1)[:, :ahead])
    return np.hstack(columns)


def _robust_ramp_rows(system: PowerSystem, schedule: CommitmentSchedule, policy: AffinePolicy,
                      t: int, total_range) -> List[LinearRow]:
    """
    Ramping from the dispatch at t to the policy's output at t+1, for both
    ends of the conditioned total-availability range.
    """
    h = system.period_length
    rows = []
    for i in range(system.n_generators):
        up_room = h * (system.ramp_up[i, t + 1] * schedule.x_on[i, t]
                       + system.startup_ramp[i, t + 1] * schedule.x_start[i, t + 1])
        down_room = h * (system.ramp_down[i, t + 1] * schedule.x_on[i, t + 1]
                         + system.shutdown_ramp[i, t + 1] * schedule.x_shut[i, t + 1])
        p = var_name(GEN, i, t)
        for k, total in enumerate(dict.fromkeys(float(x) for x in total_range)):
            target = float(policy.generation_at(t + 1, total)[i])
            rows.append(LinearExpr().add(p, 1.0).row(f"robust_ramp_up({i},{t})[{k}]", Sense.GE,
                                                     target - up_room, "robust_ramp"))
            rows.append(LinearExpr().add(p, 1.0).row(f"robust_ramp_down({i},{t})[{k}]", Sense.LE,
                                                     target + down_room, "robust_ramp"))
    return rows


def _storage_match_rows(system: PowerSystem, policy: AffinePolicy, t: int, stop: int,
                        availability: np.ndarray) -> List[LinearRow]:
    """Cumulative eta-weighted net charge from t to tau equals the policy's, for tau in t+1..stop."""
    if stop <= t or system.n_storages == 0:
        return []
    eta = system.efficiency
    totals = availability.sum(axis=0)
    rows = []
    for s in range(system.n_storages):
        plan, target = LinearExpr(), 0.0
        for k in range(t, stop + 1):
            total = totals[k - t]
            plan.add(var_name(CHA, s, k), eta[s]).add(var_name(DIS, s, k), -1.0)
            target += eta[s] * (policy.w_sm[s, k] + policy.W_sm[s, k] * total) \
                - (policy.w_sp[s, k] + policy.W_sp[s, k] * total)
            if k > t:
                rows.append(LinearExpr().add_expr(plan).row(f"storage_match({s},{k})", Sense.EQ, target,
                                                            "storage_match"))
    return rows


def _solve_window(system: PowerSystem, schedule: CommitmentSchedule, state: DispatchState, stop: int,
                  availability: np.ndarray, extra_rows: List[LinearRow], name: str, penalty_price: float,
                  backend: Optional[SolverBackend]) -> EdResult:
    backend = backend or HighsBackend()
    window: DispatchWindow = dispatch_window(system, state.t, stop, state.history, availability,
                                             schedule=schedule, penalties=True)
    program = MathProgram(f"{name}_t{state.t}")
    window.install(program)
    program.add_rows(extra_rows)
    program.set_objective(window.cost_terms(system, penalty_price))
    result = backend.solve(program)
    if result.status is SolveStatus.INFEASIBLE:
        hard = [row.name for row in program.rows if row.kind in HARD_KINDS]
        raise DispatchInfeasibleError(f"{name} infeasible at period {state.t}", stage=name, binding_rows=hard)
    if result.status is not SolveStatus.OPTIMAL:
        raise BackendError(f"{name} at period {state.t}: {result.status.value} {result.message}")

    plan = window.extract(system, result.values)
    implemented = plan.column(0)
    penalty = float(window.penalty_mw(result.values)[0])
    return EdResult(dispatch=implemented, plan=plan, penalty_mw=penalty,
                    penalty_cost=penalty_price * system.period_length * penalty,
                    dispatch_cost=dispatch_cost(system, implemented), objective=float(result.objective))


def policy_guided_laed(system: PowerSystem, schedule: CommitmentSchedule, policy: AffinePolicy,
                       uset: DynamicUncertaintySet, state: DispatchState, penalty_price: float = 5000.0,
                       budget_mode: str = "per_period", backend: Optional[SolverBackend] = None) -> EdResult:
    T = system.horizon
    stop = state.window_end(T)
    forecast = conditional_forecast(uset, state.realized)
    availability = _window_availability(state, stop, forecast)
    rows = []
    if state.t < T - 1:
        total_range = conditioned_total_range(uset, state.realized, backend, budget_mode)
        rows += _robust_ramp_rows(system, schedule, policy, state.t, total_range)
    rows += _storage_match_rows(system, policy, state.t, stop, availability)
    return _solve_window(system, schedule, state, stop, availability, rows, "policy_guided_laed",
                         penalty_price, backend)


def policy_enforcement_ed(system: PowerSystem, schedule: CommitmentSchedule, policy: AffinePolicy,
                          uset: DynamicUncertaintySet, state: DispatchState, penalty_price: float = 5000.0,
                          budget_mode: str = "per_period", backend: Optional[SolverBackend] = None) -> EdResult:
    rows = []
    if state.t < system.horizon - 1:
        total_range = conditioned_total_range(uset, state.realized, backend, budget_mode)
        rows = _robust_ramp_rows(system, schedule, policy, state.t, total_range)
    return _solve_window(system, schedule, state, state.t, state.realized[:, -1:], rows,
                         "policy_enforcement_ed", penalty_price, backend)


def deterministic_laed(system: PowerSystem, schedule: CommitmentSchedule, state: DispatchState,
                       forecast: np.ndarray, penalty_price: float = 5000.0,
                       backend: Optional[SolverBackend] = None) -> EdResult:
    """`forecast` holds availability for the periods after t (renewable x at least the look-ahead)."""
    stop = state.window_end(system.horizon)
    availability = _window_availability(state, stop, forecast)
    return _solve_window(system, schedule, state, stop, availability, [], "deterministic_laed",
                         penalty_price, backend)
