# src/robust/engine.py
"""
Multistage robust unit commitment with an affine dispatch policy.

The master problem holds the commitment binaries, the policy coefficients
and the worst-case dispatch cost z. Robust rows enter it in one of three
ways: exact deterministic rows (output limits, energy balance), dual rows
over an outer approximation (cost, ramping, storage) or scenario cuts found
by constraint generation (transmission, plus whatever the options route
there). Constraint generation either re-solves the master between rounds
or runs inside one branch-and-bound tree through lazy constraints.
"""
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Literal, Mapping, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.models.constraints import (build_commitment_constraints, commitment_cost_terms,
                                    declare_commitment_variables, schedule_values)
from src.models.power_system import CommitmentSchedule, PowerSystem
from src.robust.policy import Z, AffinePolicy, declare_policy_variables
from src.robust.reformulations import (exact_dual_rows, is_full_dimensional, outer_approximation_rows,
                                       reformulate_energy_balance, reformulate_generation_limits)
from src.robust.robust_constraints import (RobustConstraint, all_robust_constraints, balance_constraints,
                                           cost_constraint, line_constraints, ramp_constraints,
                                           storage_constraints)
from src.robust.screening import ScreenOutcome, interval_upper_bound, screen_constraint
from src.solvers.base import SolveResult, SolverBackend, SolveStatus
from src.solvers.highs_backend import HighsBackend
from src.solvers.lp_format import save_lp
from src.solvers.program import LinearRow, MathProgram
from src.uncertainty.dynamic_set import DynamicUncertaintySet, SetExtrema, set_extrema
from src.utils.exceptions import (BackendError, ConfigError, InfeasibleError, LimitReachedError,
                                  UncertaintySetError)
from src.utils.file_utils import load_document, save_json
from src.utils.logging_config import logger


class RobustUcOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mip_gap: float = Field(0.01, gt=0.0, lt=1.0)
    time_limit: Optional[float] = Field(None, gt=0.0)
    threads: int = Field(1, ge=1)
    eps_viol: float = Field(1e-5, gt=0.0)
    eps_loose_factor: float = Field(100.0, ge=1.0)
    screening: bool = True
    outer_approx: bool = True
    one_tree: bool = True
    loose_strategy: bool = True
    max_iterations: int = Field(200, ge=1)
    policy_slope_bound: float = Field(1e3, gt=0.0)
    # "monolithic" dualizes every generated row over the full set (small instances only)
    reformulation: Literal["cg", "monolithic"] = "cg"
    # an infeasible master is written here as LP text
    lp_dump_dir: Optional[str] = None

    @classmethod
    def from_settings(cls, settings, **overrides) -> "RobustUcOptions":
        values = dict(
            mip_gap=settings.MIP_GAP, time_limit=settings.TIME_LIMIT, threads=settings.THREADS,
            eps_viol=settings.EPS_VIOL, eps_loose_factor=settings.EPS_LOOSE_FACTOR,
            screening=settings.SCREENING, outer_approx=settings.OUTER_APPROX, one_tree=settings.ONE_TREE,
            loose_strategy=settings.LOOSE_STRATEGY, max_iterations=settings.MAX_ITERATIONS,
            policy_slope_bound=settings.POLICY_SLOPE_BOUND, lp_dump_dir=settings.LP_DUMP_DIR,
        )
        values.update(overrides)
        return cls(**values)


class SolveStatistics(BaseModel):
    iterations: int = 0
    master_solves: int = 0
    lps_solved: int = 0
    lps_screened: int = 0
    extrema_lps: int = 0
    cuts_added: int = 0
    wall_time: float = 0.0
    certified: bool = False
    balance_mode: str = "exact"
    mip_gap: Optional[float] = None
    errors: List[str] = []


@dataclass
class UcSolution:
    schedule: CommitmentSchedule
    policy: AffinePolicy
    worst_case_cost: float
    commitment_cost: float
    stats: SolveStatistics
    label: str = "robust"

    @property
    def total_cost(self) -> float:
        return self.commitment_cost + self.worst_case_cost

    def master_values(self) -> Dict[str, float]:
        values = schedule_values(self.schedule)
        values.update(self.policy.variable_values())
        values[Z] = self.worst_case_cost
        return values

    def to_dict(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "worst_case_cost": self.worst_case_cost,
            "commitment_cost": self.commitment_cost,
            "schedule": self.schedule.to_dict(),
            "policy": self.policy.to_dict(),
            "stats": self.stats.model_dump(),
        }

    @classmethod
    def from_dict(cls, system: PowerSystem, data: Mapping[str, Any]) -> "UcSolution":
        return cls(
            schedule=CommitmentSchedule.from_dict(data["schedule"]),
            policy=AffinePolicy.from_dict(system, data["policy"]),
            worst_case_cost=float(data["worst_case_cost"]),
            commitment_cost=float(data["commitment_cost"]),
            stats=SolveStatistics.model_validate(data.get("stats", {})),
            label=data.get("label", "robust"),
        )

    def save(self, filename, output_dir=None) -> Path:
        return save_json(self.to_dict(), filename, output_dir)

    @classmethod
    def load(cls, system: PowerSystem, path: Union[str, Path]) -> "UcSolution":
        return cls.from_dict(system, load_document(path))


# --- Separation ---

@dataclass
class _Separation:
    violated: List[Tuple[RobustConstraint, np.ndarray]]
    checked: int = 0
    screened: int = 0
    solved: int = 0


class _Separator:
    """Checks robust rows at master values by screening and separation LPs."""

    def __init__(self, uset: DynamicUncertaintySet, extrema: SetExtrema, options: RobustUcOptions,
                 backend: SolverBackend):
        self.uset = uset
        self.extrema = extrema
        self.options = options
        self.backend = backend

    def run(self, rows: List[RobustConstraint], values: Mapping[str, float], park: bool) -> _Separation:
        R, T = self.uset.n_units, self.uset.horizon
        out = _Separation(violated=[], checked=len(rows))
        pending = []
        for rc in rows:
            a = rc.weights(values, R, T)
            b = rc.bound(values)
            tol = rc.tolerance(values, self.options.eps_viol)
            if self.options.screening and screen_constraint(
                    a, b, self.extrema.unit_min, self.extrema.unit_max) is ScreenOutcome.CERTIFIED:
                out.screened += 1
                rc.looseness = b - interval_upper_bound(a, self.extrema.unit_min, self.extrema.unit_max)
                self._maybe_park(rc, tol, park)
                continue
            pending.append((rc, a, b, tol))

        results = self.uset.evaluate_many([a for _, a, _, _ in pending], self.backend, self.options.threads)
        out.solved = len(pending)
        for (rc, _, b, tol), (worst, path) in zip(pending, results):
            rc.looseness = b - worst
            if rc.looseness < -tol:
                out.violated.append((rc, path.available))
            else:
                self._maybe_park(rc, tol, park)
        return out

    def _maybe_park(self, rc: RobustConstraint, tol: float, park: bool) -> None:
        if park and self.options.loose_strategy and rc.looseness > self.options.eps_loose_factor * tol:
            rc.parked = True


def _add_cuts(program: Optional[MathProgram], violated) -> Tuple[List[LinearRow], List[str]]:
    """
    Adds one cut per new worst-case scenario. Returns the new cuts and the
    names of violated rows whose worst case was already pooled.
    """
    rows, pooled = [], []
    for rc, available in violated:
        if rc.add_scenario(available):
            row = rc.cut(available, f"_{len(rc.pool) - 1}")
            if program is not None:
                program.add_row(row)
            rows.append(row)
        else:
            pooled.append(rc.name)
    return rows, pooled


# --- Master problem ---

class _Master:
    def __init__(self, system: PowerSystem, uset: DynamicUncertaintySet, extrema: SetExtrema,
                 options: RobustUcOptions, stats: SolveStatistics):
        self.system = system
        program = MathProgram("robust_uc_master")
        declare_commitment_variables(program, system)
        program.add_rows(build_commitment_constraints(system))
        declare_policy_variables(program, system, options.policy_slope_bound)
        objective = commitment_cost_terms(system)
        objective[Z] = 1.0
        program.set_objective(objective)

        program.add_rows(reformulate_generation_limits(system, extrema))

        generated: List[RobustConstraint] = []
        if is_full_dimensional(uset, extrema):
            program.add_rows(reformulate_energy_balance(system))
        else:
            logger.warning("Uncertainty set is not full-dimensional; energy balance is enforced by "
                           "constraint generation instead of the exact equalities")
            stats.balance_mode = "cg"
            generated += balance_constraints(system)

        intertemporal = [cost_constraint(system)] + ramp_constraints(system) + storage_constraints(system)
        if options.reformulation == "monolithic":
            for rc in generated + intertemporal + line_constraints(system):
                program.add_rows(exact_dual_rows(rc, uset, program))
            generated = []
        else:
            if options.outer_approx:
                for rc in intertemporal:
                    program.add_rows(outer_approximation_rows(rc, extrema, program))
            else:
                generated += intertemporal
            generated += line_constraints(system)

        self.program = program
        self.generated = generated
        logger.info(f"Master built: {program.n_variables} variables, {len(program.rows)} rows, "
                    f"{len(generated)} rows left to constraint generation")

    def seed(self, available: np.ndarray) -> int:
        """Starts every generated row's pool with one scenario."""
        return len(_add_cuts(self.program, [(rc, available) for rc in self.generated])[0])

    def diagnose_infeasibility(self, backend: SolverBackend) -> InfeasibleError:
        commitment = MathProgram("commitment_only")
        declare_commitment_variables(commitment, self.system)
        commitment.add_rows(build_commitment_constraints(self.system))
        commitment.set_objective(commitment_cost_terms(self.system))
        if backend.solve(commitment).status is SolveStatus.INFEASIBLE:
            return InfeasibleError("Commitment constraints alone are infeasible (check minimum up/down "
                                   "times against the initial state)", stage="commitment")
        kinds = sorted({row.kind for row in self.program.rows if row.kind != "commitment"})
        return InfeasibleError("No commitment admits an affine policy satisfying the robust rows",
                               stage="robust_rows", binding_rows=kinds)


def _solution(system: PowerSystem, result: SolveResult, stats: SolveStatistics, label: str = "robust") -> UcSolution:
    values = result.values
    schedule = CommitmentSchedule.from_on_off(
        system, np.round([[values[f"x_on({i},{t})"] for t in range(system.horizon)]
                          for i in range(system.n_generators)]).reshape(system.n_generators, system.horizon))
    stats.mip_gap = result.mip_gap
    return UcSolution(schedule=schedule, policy=AffinePolicy.from_values(system, values),
                      worst_case_cost=float(values[Z]), commitment_cost=schedule.commitment_cost(system),
                      stats=stats, label=label)


def _check_inputs(system: PowerSystem, uset: DynamicUncertaintySet) -> None:
    if uset.n_units != system.n_renewables:
        raise ConfigError(f"Uncertainty set has {uset.n_units} units, system has {system.n_renewables} renewables")
    if uset.horizon != system.horizon:
        raise ConfigError(f"Uncertainty set covers {uset.horizon} periods, system has {system.horizon}")
    if not uset.is_polyhedral:
        raise UncertaintySetError(f"Robust UC needs a polyhedral set; norm '{uset.norm}' is not supported")


def solve_robust_uc(system: PowerSystem, uset: DynamicUncertaintySet,
                    options: Optional[RobustUcOptions] = None,
                    backend: Optional[SolverBackend] = None) -> UcSolution:
    """
    Solves the robust UC master by constraint generation and returns the
    commitment, the affine policy and the worst-case dispatch cost.
    """
    options = options or RobustUcOptions()
    backend = backend or HighsBackend()
    _check_inputs(system, uset)
    start = time.perf_counter()
    stats = SolveStatistics()
    # separation LPs must not share the master's backend (its lock is held during lazy callbacks)
    lp_backend = backend.spawn()

    logger.info(f"Robust UC on '{system.name}': T={system.horizon}, {system.n_generators} generators, "
                f"{system.n_renewables} renewables, gamma={uset.gamma}, norm={uset.norm}")
    extrema = set_extrema(uset, lp_backend, include_units=True, workers=options.threads)
    stats.extrema_lps = extrema.lp_count

    master = _Master(system, uset, extrema, options, stats)
    separator = _Separator(uset, extrema, options, lp_backend)
    stats.cuts_added += master.seed(uset.forecast_path().available)

    def elapsed() -> float:
        return time.perf_counter() - start

    def finish(result: SolveResult, certified: bool) -> UcSolution:
        stats.certified = certified
        stats.wall_time = elapsed()
        solution = _solution(system, result, stats)
        if not certified:
            logger.warning(f"Returning a non-certified incumbent (z={solution.worst_case_cost:.2f})")
        logger.info(f"Robust UC done: total={solution.total_cost:.2f} (commitment "
                    f"{solution.commitment_cost:.2f}, worst-case dispatch {solution.worst_case_cost:.2f}), "
                    f"{stats.iterations} iterations, {stats.lps_solved} LPs, {stats.lps_screened} screened, "
                    f"{stats.wall_time:.2f}s")
        return solution

    def solve_master(callback=None) -> SolveResult:
        stats.master_solves += 1
        result = backend.solve(master.program, callback)
        if result.status is SolveStatus.INFEASIBLE:
            if options.lp_dump_dir:
                save_lp(master.program, Path(options.lp_dump_dir) / f"{master.program.name}.lp")
            raise master.diagnose_infeasibility(backend)
        if result.status is SolveStatus.UNBOUNDED:
            raise BackendError("Master problem unbounded; set a finite policy slope bound")
        return result

    # --- 1. One-tree pass (lazy constraints inside branch-and-bound) ---
    one_tree = (options.one_tree and master.generated and master.program.is_mip
                and backend.capability.supports_lazy_constraints)
    result: Optional[SolveResult] = None
    if one_tree:
        def lazy(values):
            found = separator.run(master.generated, values, park=False)
            stats.lps_solved += found.solved
            stats.lps_screened += found.screened
            rows, _ = _add_cuts(None, found.violated)
            stats.cuts_added += len(rows)
            return rows

        result = solve_master(lazy)
        for row in result.injected_rows:
            if not master.program.has_row(row.name):
                master.program.add_row(row)
        stats.iterations += 1
        logger.info(f"One-tree pass finished: {len(result.injected_rows)} lazy cuts")
    elif options.one_tree and master.generated and master.program.is_mip:
        logger.info(f"Backend '{backend.name}' has no lazy constraints; using iterative constraint generation")

    # --- 2. Iterative constraint generation (also certifies a one-tree result) ---
    while True:
        if result is None:
            result = solve_master()
        if result.status is SolveStatus.LIMIT:
            if not result.has_solution:
                raise LimitReachedError("Master hit its limit before finding an incumbent")
            return finish(result, certified=False)

        # rows parked in earlier rounds; rows parked below were just checked at these values
        parked = [rc for rc in master.generated if rc.parked]
        active = [rc for rc in master.generated if not rc.parked]
        found = separator.run(active, result.values, park=True)
        stats.lps_solved += found.solved
        stats.lps_screened += found.screened
        new_cuts, pooled = _add_cuts(master.program, found.violated)

        if not new_cuts and parked:
            # restricted master converged: recheck the parked rows
            for rc in parked:
                rc.parked = False
            recheck = separator.run(parked, result.values, park=True)
            stats.lps_solved += recheck.solved
            stats.lps_screened += recheck.screened
            new_cuts, repooled = _add_cuts(master.program, recheck.violated)
            found.violated += recheck.violated
            pooled += repooled

        stats.cuts_added += len(new_cuts)
        stats.iterations += 1
        logger.info(f"CG iteration {stats.iterations}: checked {found.checked}, screened {found.screened}, "
                    f"violated {len(found.violated)}, cuts {len(new_cuts)}, master obj {result.objective:.4f}")

        if not new_cuts:
            if pooled:
                message = (f"{len(pooled)} rows exceed the violation tolerance at scenarios already in "
                           f"their pools: {', '.join(sorted(pooled)[:5])}")
                logger.warning(message)
                stats.errors.append(message)
            return finish(result, certified=True)
        if stats.iterations >= options.max_iterations:
            stats.errors.append(f"iteration limit {options.max_iterations} reached")
            return finish(result, certified=False)
        if options.time_limit is not None and elapsed() > options.time_limit:
            stats.errors.append(f"time limit {options.time_limit}s reached")
            return finish(result, certified=False)
        result = None


def verify_solution(system: PowerSystem, uset: DynamicUncertaintySet, solution: UcSolution,
                    backend: Optional[SolverBackend] = None, eps_viol: float = 1e-5,
                    include_cost: bool = True) -> Dict[str, float]:
    """
    Exhaustive separation of every robust row (limits, balance, cost,
    ramping, storage, lines) at the solution. Returns violation per row
    name, empty when the solution is robust feasible.
    """
    backend = backend or HighsBackend()
    values = solution.master_values()
    rows = all_robust_constraints(system)
    if not include_cost:
        rows = [rc for rc in rows if rc.name != "cost"]
    R, T = uset.n_units, uset.horizon
    worst = uset.evaluate_many([rc.weights(values, R, T) for rc in rows], backend)
    violations = {}
    for rc, (value, _) in zip(rows, worst):
        excess = value - rc.bound(values)
        if excess > rc.tolerance(values, eps_viol):
            violations[rc.name] = excess
    if violations:
        logger.warning(f"{len(violations)} robust rows violated, worst {max(violations, key=violations.get)}")
    return violations


def exact_worst_case_cost(system: PowerSystem, uset: DynamicUncertaintySet, policy: AffinePolicy,
                          backend: Optional[SolverBackend] = None) -> float:
    """max over the set of the policy's dispatch cost (one LP)."""
    rc = cost_constraint(system)
    values = policy.variable_values()
    values[Z] = 0.0
    value, _ = uset.maximize_linear(rc.weights(values, uset.n_units, uset.horizon), backend)
    # bound is -(intercept cost) at z = 0
    return value - rc.bound(values)
