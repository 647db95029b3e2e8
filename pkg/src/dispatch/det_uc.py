# src/dispatch/det_uc.py
"""
Day-ahead deterministic UC on a point forecast, with system-wide down and
up reserve carried by the committed generators.
"""
import time
from typing import Optional, Tuple

import numpy as np

from src.dispatch.reserves import ReserveRequirement
from src.models.constraints import (GEN, DispatchHistory, DispatchWindow, build_commitment_constraints,
                                    commitment_cost_terms, declare_commitment_variables, dispatch_cost,
                                    dispatch_window)
from src.models.power_system import CommitmentSchedule, PowerSystem
from src.robust.engine import SolveStatistics, UcSolution
from src.robust.policy import AffinePolicy
from src.solvers.base import SolverBackend, SolveStatus
from src.solvers.highs_backend import HighsBackend
from src.solvers.program import LinearExpr, MathProgram, Sense, var_name
from src.utils.exceptions import BackendError, InfeasibleError, LimitReachedError
from src.utils.logging_config import logger

R_DOWN, R_UP = "r_dn", "r_up"


def build_deterministic_uc(system: PowerSystem, forecast: np.ndarray,
                           reserves: Optional[ReserveRequirement] = None) -> Tuple[MathProgram, DispatchWindow]:
    T, G = system.horizon, system.n_generators
    reserves = reserves or ReserveRequirement.zero(T)
    if reserves.horizon != T:
        raise ValueError(f"reserves cover {reserves.horizon} periods, system has {T}")

    program = MathProgram("deterministic_uc")
    declare_commitment_variables(program, system)
    program.add_rows(build_commitment_constraints(system))
    window = dispatch_window(system, 0, T - 1, DispatchHistory.empty(system), forecast)
    window.install(program)

    for t in range(T):
        down_total, up_total = LinearExpr(), LinearExpr()
        for i in range(G):
            r_dn = program.add_variable(var_name(R_DOWN, i, t))
            r_up = program.add_variable(var_name(R_UP, i, t))
            p, on = var_name(GEN, i, t), var_name("x_on", i, t)
            program.add_row(LinearExpr().add(p, 1.0).add(r_dn, -1.0).add(on, -system.p_min[i, t])
                            .row(f"reserve_down({i},{t})", Sense.GE, 0.0, "reserve"))
            program.add_row(LinearExpr().add(p, 1.0).add(r_up, 1.0).add(on, -system.p_max[i, t])
                            .row(f"reserve_up({i},{t})", Sense.LE, 0.0, "reserve"))
            down_total.add(r_dn, 1.0)
            up_total.add(r_up, 1.0)
        program.add_row(down_total.row(f"reserve_down_total({t})", Sense.GE, reserves.down[t], "reserve"))
        program.add_row(up_total.row(f"reserve_up_total({t})", Sense.GE, reserves.up[t], "reserve"))

    objective = commitment_cost_terms(system)
    objective.update(window.cost_terms(system))
    program.set_objective(objective)
    return program, window


def solve_deterministic_uc(system: PowerSystem, forecast: np.ndarray,
                           reserves: Optional[ReserveRequirement] = None,
                           backend: Optional[SolverBackend] = None) -> UcSolution:
    """MILP on the forecast; the returned policy replays the dispatch plan (zero slopes)."""
    backend = backend or HighsBackend()
    start = time.perf_counter()
    forecast = np.asarray(forecast, dtype=float).reshape(system.n_renewables, system.horizon)
    program, window = build_deterministic_uc(system, forecast, reserves)

    result = backend.solve(program)
    if result.status is SolveStatus.INFEASIBLE:
        stage = "reserves" if reserves is not None and (reserves.up.any() or reserves.down.any()) else "dispatch"
        raise InfeasibleError(f"Deterministic UC infeasible ({stage})", stage=stage,
                              binding_rows=[r.name for r in program.rows if r.kind == "reserve"])
    if result.status is SolveStatus.LIMIT and not result.has_solution:
        raise LimitReachedError("Deterministic UC hit its limit without an incumbent")
    if not result.has_solution:
        raise BackendError(f"Deterministic UC: {result.status.value} {result.message}")

    values = result.values
    x_on = np.round([[values[var_name("x_on", i, t)] for t in range(system.horizon)]
                     for i in range(system.n_generators)]).reshape(system.n_generators, system.horizon)
    schedule = CommitmentSchedule.from_on_off(system, x_on)
    plan = window.extract(system, values)
    stats = SolveStatistics(iterations=1, master_solves=1, wall_time=time.perf_counter() - start,
                            certified=result.status is SolveStatus.OPTIMAL, mip_gap=result.mip_gap)
    solution = UcSolution(schedule=schedule, policy=AffinePolicy.constant(system, plan),
                          worst_case_cost=dispatch_cost(system, plan),
                          commitment_cost=schedule.commitment_cost(system), stats=stats, label="deterministic")
    logger.info(f"Deterministic UC on '{system.name}': total={solution.total_cost:.2f} "
                f"(commitment {solution.commitment_cost:.2f}, dispatch {solution.worst_case_cost:.2f})")
    return solution
