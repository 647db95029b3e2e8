# src/models/constraints.py
"""
Deterministic constraint blocks shared by every solver: the commitment set
over (x_on, x_start, x_shut) and the dispatch feasibility sets over a window
of periods. Builders are pure; they only emit LinearRows whose coefficients
come from system data.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional

import numpy as np

from src.models.power_system import CommitmentSchedule, PowerSystem
from src.solvers.program import (ConstraintBlock, LinearExpr, MathProgram, Sense, Variable,
                                 VarKind, var_name)

# --- Dispatch data ---


@dataclass(frozen=True)
class Dispatch:
    """Dispatch of consecutive periods starting at `start` (columns = periods)."""

    generation: np.ndarray  # generator x n
    renewable: np.ndarray  # renewable x n
    discharge: np.ndarray  # storage x n
    charge: np.ndarray  # storage x n
    start: int = 0

    @property
    def n_periods(self) -> int:
        return self.generation.shape[1]

    def column(self, k: int) -> "Dispatch":
        sl = slice(k, k + 1)
        return Dispatch(self.generation[:, sl], self.renewable[:, sl], self.discharge[:, sl],
                        self.charge[:, sl], self.start + k)

    @classmethod
    def empty(cls, system: PowerSystem, start: int = 0) -> "Dispatch":
        return cls(np.zeros((system.n_generators, 0)), np.zeros((system.n_renewables, 0)),
                   np.zeros((system.n_storages, 0)), np.zeros((system.n_storages, 0)), start)


@dataclass(frozen=True)
class DispatchHistory:
    """Realized dispatch for periods 0..t-1."""

    dispatch: Dispatch

    @classmethod
    def empty(cls, system: PowerSystem) -> "DispatchHistory":
        return cls(Dispatch.empty(system))

    @property
    def periods(self) -> int:
        return self.dispatch.n_periods

    def last_generation(self, system: PowerSystem) -> np.ndarray:
        if self.periods == 0:
            return system.initial_output.copy()
        return self.dispatch.generation[:, -1]

    def storage_level(self, system: PowerSystem) -> np.ndarray:
        """Stored energy after the last realized period (MWh)."""
        d = self.dispatch
        net = system.efficiency[:, None] * d.charge - d.discharge
        return system.storage_initial + system.period_length * net.sum(axis=1)

    def append(self, step: Dispatch) -> "DispatchHistory":
        d = self.dispatch
        return DispatchHistory(Dispatch(
            np.hstack([d.generation, step.generation]),
            np.hstack([d.renewable, step.renewable]),
            np.hstack([d.discharge, step.discharge]),
            np.hstack([d.charge, step.charge]),
        ))


def dispatch_cost(system: PowerSystem, dispatch: Dispatch) -> float:
    """Variable generation cost of the dispatched periods ($)."""
    if dispatch.n_periods == 0:
        return 0.0
    return float(system.period_length * np.sum(system.variable_cost[:, None] * dispatch.generation))


def storage_levels(system: PowerSystem, dispatch: Dispatch,
                   initial_level: Optional[np.ndarray] = None) -> np.ndarray:
    """Stored energy at the end of each dispatched period (storage x n, MWh)."""
    q0 = system.storage_initial if initial_level is None else initial_level
    net = system.efficiency[:, None] * dispatch.charge - dispatch.discharge
    return q0[:, None] + system.period_length * np.cumsum(net, axis=1)


# --- Commitment set ---

COMMITMENT_FIELDS = ("x_on", "x_start", "x_shut")


def declare_commitment_variables(program: MathProgram, system: PowerSystem) -> None:
    for i in range(system.n_generators):
        for t in range(system.horizon):
            for f in COMMITMENT_FIELDS:
                program.add_variable(var_name(f, i, t), 0.0, 1.0, VarKind.BINARY)


def commitment_cost_terms(system: PowerSystem) -> Dict[str, float]:
    h = system.period_length
    terms = {}
    for i in range(system.n_generators):
        for t in range(system.horizon):
            terms[var_name("x_on", i, t)] = system.no_load_cost[i] * h
            terms[var_name("x_start", i, t)] = system.startup_cost[i]
            terms[var_name("x_shut", i, t)] = system.shutdown_cost[i]
    return terms


def build_commitment_constraints(system: PowerSystem) -> ConstraintBlock:
    """
    State transition, start/shut exclusivity, pairwise minimum up/down
    windows and the boundary conditions implied by the initial state.
    """
    T = system.horizon
    block = ConstraintBlock()
    for i, gen in enumerate(system.generators):
        on0 = 1.0 if gen.initial_on else 0.0
        for t in range(T):
            expr = LinearExpr().add(var_name("x_start", i, t), 1.0).add(var_name("x_shut", i, t), -1.0)
            expr.add(var_name("x_on", i, t), -1.0)
            if t == 0:
                expr.add_constant(on0)
            else:
                expr.add(var_name("x_on", i, t - 1), 1.0)
            block.append(expr.row(f"transition({i},{t})", Sense.EQ, 0.0, "commitment"))

            block.append(LinearExpr().add(var_name("x_start", i, t), 1.0).add(var_name("x_shut", i, t), 1.0)
                         .row(f"start_or_shut({i},{t})", Sense.LE, 1.0, "commitment"))

            for tau in range(t + 1, min(t + gen.min_up, T)):
                block.append(LinearExpr().add(var_name("x_start", i, t), 1.0).add(var_name("x_on", i, tau), -1.0)
                             .row(f"min_up({i},{t},{tau})", Sense.LE, 0.0, "commitment"))
            for tau in range(t + 1, min(t + gen.min_down, T)):
                block.append(LinearExpr().add(var_name("x_shut", i, t), 1.0).add(var_name("x_on", i, tau), 1.0)
                             .row(f"min_down({i},{t},{tau})", Sense.LE, 1.0, "commitment"))

        hours = gen.initial_hours_in_state
        if hours is not None:
            if gen.initial_on:
                for t in range(min(max(gen.min_up - hours, 0), T)):
                    block.append(LinearExpr().add(var_name("x_on", i, t), 1.0)
                                 .row(f"initial_on({i},{t})", Sense.GE, 1.0, "commitment"))
            else:
                for t in range(min(max(gen.min_down - hours, 0), T)):
                    block.append(LinearExpr().add(var_name("x_on", i, t), 1.0)
                                 .row(f"initial_off({i},{t})", Sense.LE, 0.0, "commitment"))
    return block


def schedule_values(schedule: CommitmentSchedule) -> Dict[str, float]:
    values = {}
    for f in COMMITMENT_FIELDS:
        arr = getattr(schedule, f)
        for (i, t), v in np.ndenumerate(arr):
            values[var_name(f, i, t)] = float(v)
    return values


def check_schedule(system: PowerSystem, schedule: CommitmentSchedule, tol: float = 1e-9) -> bool:
    """True when the schedule satisfies the commitment block (and is binary)."""
    values = schedule_values(schedule)
    if any(v not in (0.0, 1.0) for v in values.values()):
        return False
    return build_commitment_constraints(system).is_satisfied(values, tol)


# --- Dispatch feasibility sets ---

GEN, REN, DIS, CHA = "p_g", "p_r", "p_sp", "p_sm"
PEN_SHORT, PEN_SURPLUS, PEN_LINE_POS, PEN_LINE_NEG = "pen_short", "pen_surplus", "pen_line_pos", "pen_line_neg"


class _Commitment:
    """x terms either as constants of a fixed schedule or as master variables."""

    def __init__(self, system: PowerSystem, schedule: Optional[CommitmentSchedule]):
        self.system = system
        self.schedule = schedule

    def add(self, expr: LinearExpr, f: str, i: int, t: int, coef: float) -> None:
        if coef == 0.0:
            return
        if t < 0:
            if f == "x_on":
                expr.add_constant(coef * self.system.initial_on[i])
            return
        if self.schedule is None:
            expr.add(var_name(f, i, t), coef)
        else:
            expr.add_constant(coef * float(getattr(self.schedule, f)[i, t]))


@dataclass
class DispatchWindow:
    """Dispatch variables and rows for periods start..stop (inclusive)."""

    start: int
    stop: int
    variables: List[Variable] = field(default_factory=list)
    rows: ConstraintBlock = field(default_factory=ConstraintBlock)
    penalty_variables: List[str] = field(default_factory=list)

    @property
    def periods(self) -> range:
        return range(self.start, self.stop + 1)

    def install(self, program: MathProgram) -> None:
        for v in self.variables:
            program.add_variable(v.name, v.lb, v.ub, v.kind)
        program.add_rows(self.rows)

    def cost_terms(self, system: PowerSystem, penalty_price: float = 0.0) -> Dict[str, float]:
        h = system.period_length
        terms = {var_name(GEN, i, t): system.variable_cost[i] * h
                 for t in self.periods for i in range(system.n_generators)}
        for name in self.penalty_variables:
            terms[name] = penalty_price * h
        return terms

    def extract(self, system: PowerSystem, values: Mapping[str, float]) -> Dispatch:
        def grab(base: str, n: int) -> np.ndarray:
            return np.array([[values[var_name(base, i, t)] for t in self.periods] for i in range(n)],
                            dtype=float).reshape(n, len(self.periods))
        return Dispatch(grab(GEN, system.n_generators), grab(REN, system.n_renewables),
                        grab(DIS, system.n_storages), grab(CHA, system.n_storages), self.start)

    def penalty_mw(self, values: Mapping[str, float]) -> np.ndarray:
        """Total penalised MW per period of the window."""
        out = np.zeros(len(self.periods))
        for name in self.penalty_variables:
            t = int(name.rsplit(",", 1)[-1].rstrip(")").split("(")[-1])
            out[t - self.start] += values[name]
        return out


def dispatch_window(system: PowerSystem, start: int, stop: int, history: DispatchHistory,
                    availability: np.ndarray, schedule: Optional[CommitmentSchedule] = None,
                    penalties: bool = False) -> DispatchWindow:
    """
    Dispatch constraints for periods start..stop given the realized history
    of periods before `start`. `availability` is renewable x (stop-start+1).
    With `schedule=None` the commitment enters as x_on/x_start/x_shut variables.
    With `penalties=True` balance and line rows get nonnegative slack variables.
    """
    T = system.horizon
    if not 0 <= start <= stop < T:
        raise IndexError(f"dispatch window [{start}, {stop}] outside horizon 0..{T - 1}")
    if history.periods != start:
        raise ValueError(f"history covers {history.periods} periods, expected {start}")
    availability = np.asarray(availability, dtype=float).reshape(system.n_renewables, stop - start + 1)

    h = system.period_length
    G, R, S = system.n_generators, system.n_renewables, system.n_storages
    x = _Commitment(system, schedule)
    window = DispatchWindow(start, stop)
    rows = window.rows
    prev_output = history.last_generation(system)
    hist = history.dispatch
    hist_net = (system.efficiency[:, None] * hist.charge - hist.discharge).sum(axis=1) if S else np.zeros(0)

    for t in window.periods:
        for i in range(G):
            window.variables.append(Variable(var_name(GEN, i, t), 0.0))
        for j in range(R):
            window.variables.append(Variable(var_name(REN, j, t), 0.0))
        for s in range(S):
            window.variables.append(Variable(var_name(DIS, s, t), 0.0))
            window.variables.append(Variable(var_name(CHA, s, t), 0.0))

        # generation limits gated by x_on
        for i in range(G):
            p = var_name(GEN, i, t)
            lo = LinearExpr().add(p, 1.0)
            x.add(lo, "x_on", i, t, -system.p_min[i, t])
            rows.append(lo.row(f"gen_min({i},{t})", Sense.GE, 0.0, "gen_limit"))
            hi = LinearExpr().add(p, 1.0)
            x.add(hi, "x_on", i, t, -system.p_max[i, t])
            rows.append(hi.row(f"gen_max({i},{t})", Sense.LE, 0.0, "gen_limit"))

        # ramping against the previous period
        for i in range(G):
            delta = LinearExpr().add(var_name(GEN, i, t), 1.0)
            if t == start:
                delta.add_constant(-prev_output[i])
            else:
                delta.add(var_name(GEN, i, t - 1), -1.0)
            up = LinearExpr().add_expr(delta)
            x.add(up, "x_on", i, t - 1, -h * system.ramp_up[i, t])
            x.add(up, "x_start", i, t, -h * system.startup_ramp[i, t])
            rows.append(up.row(f"ramp_up({i},{t})", Sense.LE, 0.0, "ramp"))
            down = LinearExpr().add_expr(delta)
            x.add(down, "x_on", i, t, h * system.ramp_down[i, t])
            x.add(down, "x_shut", i, t, h * system.shutdown_ramp[i, t])
            rows.append(down.row(f"ramp_down({i},{t})", Sense.GE, 0.0, "ramp"))

        for j in range(R):
            rows.append(LinearExpr().add(var_name(REN, j, t), 1.0)
                        .row(f"renewable_max({j},{t})", Sense.LE, availability[j, t - start], "renewable"))

        for s in range(S):
            sp, sm = var_name(DIS, s, t), var_name(CHA, s, t)
            rows.append(LinearExpr().add(sp, 1.0).row(f"discharge_min({s},{t})", Sense.GE,
                                                      system.discharge_min[s, t], "storage_bound"))
            rows.append(LinearExpr().add(sp, 1.0).row(f"discharge_max({s},{t})", Sense.LE,
                                                      system.discharge_max[s, t], "storage_bound"))
            rows.append(LinearExpr().add(sm, 1.0).row(f"charge_min({s},{t})", Sense.GE,
                                                      system.charge_min[s, t], "storage_bound"))
            rows.append(LinearExpr().add(sm, 1.0).row(f"charge_max({s},{t})", Sense.LE,
                                                      system.charge_max[s, t], "storage_bound"))
            level = LinearExpr(constant=system.storage_initial[s] + h * hist_net[s])
            for k in range(start, t + 1):
                level.add(var_name(CHA, s, k), h * system.efficiency[s])
                level.add(var_name(DIS, s, k), -h)
            rows.append(level.row(f"storage_min({s},{t})", Sense.GE, 0.0, "storage_energy"))
            rows.append(level.row(f"storage_max({s},{t})", Sense.LE, system.storage_capacity[s], "storage_energy"))

        injection = LinearExpr()
        for i in range(G):
            injection.add(var_name(GEN, i, t), 1.0)
        for j in range(R):
            injection.add(var_name(REN, j, t), 1.0)
        for s in range(S):
            injection.add(var_name(DIS, s, t), 1.0).add(var_name(CHA, s, t), -1.0)

        for l in range(system.n_lines):
            flow = LinearExpr(constant=-system.demand_flow[l, t])
            for i in range(G):
                flow.add(var_name(GEN, i, t), system.alpha_generator[l, i])
            for j in range(R):
                flow.add(var_name(REN, j, t), system.alpha_renewable[l, j])
            for s in range(S):
                flow.add(var_name(DIS, s, t), system.alpha_storage[l, s])
                flow.add(var_name(CHA, s, t), -system.alpha_storage[l, s])
            upper, lower = LinearExpr().add_expr(flow), LinearExpr().add_expr(flow)
            if penalties:
                pos, neg = var_name(PEN_LINE_POS, l, t), var_name(PEN_LINE_NEG, l, t)
                window.variables += [Variable(pos, 0.0), Variable(neg, 0.0)]
                window.penalty_variables += [pos, neg]
                upper.add(pos, -1.0)
                lower.add(neg, 1.0)
            rows.append(upper.row(f"line_max({l},{t})", Sense.LE, system.flow_limit[l], "line"))
            rows.append(lower.row(f"line_min({l},{t})", Sense.GE, -system.flow_limit[l], "line"))

        balance = LinearExpr().add_expr(injection)
        if penalties:
            short, surplus = var_name(PEN_SHORT, t), var_name(PEN_SURPLUS, t)
            window.variables += [Variable(short, 0.0), Variable(surplus, 0.0)]
            window.penalty_variables += [short, surplus]
            balance.add(short, 1.0).add(surplus, -1.0)
        rows.append(balance.row(f"balance({t})", Sense.EQ, system.total_demand[t], "balance"))
    return window


def dispatch_feasible_set(system: PowerSystem, schedule: CommitmentSchedule, t: int,
                          prev_dispatch: DispatchHistory, available_renewables_t,
                          penalties: bool = False) -> DispatchWindow:
    """The single-period dispatch set of period t given realized history 0..t-1."""
    return dispatch_window(system, t, t, prev_dispatch, np.asarray(available_renewables_t, dtype=float),
                           schedule=schedule, penalties=penalties)


def dispatch_values(dispatch: Dispatch) -> Dict[str, float]:
    """Variable values of a Dispatch, keyed like the window variables."""
    values = {}
    for base, arr in ((GEN, dispatch.generation), (REN, dispatch.renewable),
                      (DIS, dispatch.discharge), (CHA, dispatch.charge)):
        for (i, k), v in np.ndenumerate(arr):
            values[var_name(base, i, dispatch.start + k)] = float(v)
    return values
