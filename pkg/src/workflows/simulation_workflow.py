# src/workflows/simulation_workflow.py
"""
Rolling-horizon operation of one day-ahead UC solution. For each simulated
availability trajectory, period t's availability is revealed only at t, the
configured ED engine sets the dispatch and the implemented dispatch becomes
history for t+1.
"""
import asyncio
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from src.dispatch.engines import (DispatchState, EdEngine, EdResult, deterministic_laed, policy_enforcement_ed,
                                  policy_guided_laed)
from src.models.constraints import DispatchHistory
from src.models.power_system import PowerSystem
from src.robust.engine import UcSolution
from src.solvers.base import SolverBackend
from src.solvers.highs_backend import HighsBackend
from src.uncertainty.dynamic_set import DynamicUncertaintySet
from src.uncertainty.estimation import VarEstimate
from src.uncertainty.sampling import conditional_forecast, simulate_paths
from src.utils.logging_config import logger
from src.workflows.metrics import LOG_COLUMNS, SimulationReport


class SimulationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_trajectories: int = Field(100, ge=1)
    seed: int = Field(20160601, ge=0)
    engine: EdEngine = EdEngine.POLICY_GUIDED
    lookahead: int = Field(3, ge=0)
    penalty_price: float = Field(5000.0, gt=0.0)
    cvar_level: float = Field(0.1, gt=0.0, le=1.0)
    budget_mode: str = "per_period"
    threads: int = Field(1, ge=1)

    @classmethod
    def from_settings(cls, settings, **overrides) -> "SimulationConfig":
        values = dict(n_trajectories=settings.N_TRAJECTORIES, seed=settings.SEED, lookahead=settings.LOOKAHEAD,
                      penalty_price=settings.PENALTY_PRICE, cvar_level=settings.CVAR_LEVEL,
                      budget_mode=settings.BUDGET_MODE, threads=settings.THREADS)
        values.update(overrides)
        return cls(**values)


def draw_trajectories(estimate: VarEstimate, uset: DynamicUncertaintySet, n: int, seed: int,
                      offset: int = 0) -> List[np.ndarray]:
    """One independent generator per trajectory, spawned from the run seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    paths = []
    for child in children:
        path = simulate_paths(estimate, uset.p_max, 1, rng=np.random.default_rng(child), offset=offset,
                              initial_lags=uset.initial_lags)[0]
        paths.append(path.available)
    return paths


class SimulationWorkflow:
    description: str = "Simulates real-time dispatch of a UC solution over availability trajectories."

    def __init__(self, system: PowerSystem, solution: UcSolution, uset: DynamicUncertaintySet,
                 config: Optional[SimulationConfig] = None, backend: Optional[SolverBackend] = None):
        self.system = system
        self.solution = solution
        self.uset = uset
        self.config = config or SimulationConfig()
        self.backend = backend or HighsBackend()

    # --- one trajectory ---

    def _dispatch(self, state: DispatchState, available: np.ndarray, backend: SolverBackend) -> EdResult:
        cfg, sol = self.config, self.solution
        if cfg.engine is EdEngine.POLICY_GUIDED:
            return policy_guided_laed(self.system, sol.schedule, sol.policy, self.uset, state,
                                      cfg.penalty_price, cfg.budget_mode, backend)
        if cfg.engine is EdEngine.POLICY_ENFORCEMENT:
            return policy_enforcement_ed(self.system, sol.schedule, sol.policy, self.uset, state,
                                         cfg.penalty_price, cfg.budget_mode, backend)
        forecast = conditional_forecast(self.uset, available[:, :state.t + 1])
        return deterministic_laed(self.system, sol.schedule, state, forecast, cfg.penalty_price, backend)

    def simulate_trajectory(self, index: int, available: np.ndarray,
                            backend: Optional[SolverBackend] = None) -> pd.DataFrame:
        """Per-period log of one trajectory; only columns 0..t of `available` are read at period t."""
        system = self.system
        backend = backend or self.backend.spawn()
        available = np.asarray(available, dtype=float).reshape(system.n_renewables, system.horizon)
        history = DispatchHistory.empty(system)
        records = []
        for t in range(system.horizon):
            state = DispatchState(t, history, available[:, :t + 1], self.config.lookahead)
            result = self._dispatch(state, available, backend)
            history = history.append(result.dispatch)
            level = history.storage_level(system)
            records.append({
                "trajectory": index,
                "period": t,
                "dispatch_cost": result.dispatch_cost,
                "penalty_mw": result.penalty_mw,
                "penalty_cost": result.penalty_cost,
                "renewable_used": float(result.dispatch.renewable.sum()),
                "renewable_available": float(available[:, t].sum()),
                "stored_avg_mwh": float(level.mean()) if level.size else 0.0,
            })
        return pd.DataFrame.from_records(records, columns=list(LOG_COLUMNS))

    # --- all trajectories ---

    async def arun(self, trajectories: Sequence[np.ndarray], label: Optional[str] = None):
        """
        Simulates every trajectory on worker threads (at most `threads` at a
        time) and returns (report, log). A failing trajectory is recorded and
        the report is marked partial.
        """
        label = label or self.solution.label
        logger.info(f"Simulating '{label}' with {self.config.engine.value} ED over {len(trajectories)} trajectories")
        semaphore = asyncio.Semaphore(self.config.threads)

        async def one(index: int, path: np.ndarray):
            async with semaphore:
                try:
                    log = await asyncio.to_thread(self.simulate_trajectory, index, path)
                    return index, log, None
                except Exception as e:
                    logger.error(f"Trajectory {index} of '{label}' failed: {e}", exc_info=True)
                    return index, None, f"trajectory {index}: {type(e).__name__}: {e}"

        outcomes = await asyncio.gather(*(one(k, p) for k, p in enumerate(trajectories)))
        logs = [log for _, log, _ in outcomes if log is not None]
        failed = [k for k, log, _ in outcomes if log is None]
        errors = [err for _, _, err in outcomes if err]
        log = pd.concat(logs, ignore_index=True) if logs else pd.DataFrame(columns=list(LOG_COLUMNS))
        report = SimulationReport.from_log(label, log, self.solution.commitment_cost, len(trajectories),
                                           self.config.cvar_level, failed, errors)
        if report.partial:
            logger.warning(f"'{label}': {len(failed)} of {len(trajectories)} trajectories failed; report is partial")
        logger.info(f"'{label}': cost avg {report.cost_avg:.2f}, CVaR {report.cost_cvar:.2f}, "
                    f"penalty freq {100 * report.penalty_freq:.2f}%")
        return report, log

    def run(self, trajectories: Sequence[np.ndarray], label: Optional[str] = None):
        return asyncio.run(self.arun(trajectories, label))


def run_simulation(system: PowerSystem, solution: UcSolution, uset: DynamicUncertaintySet,
                   config: Optional[SimulationConfig] = None, estimate: Optional[VarEstimate] = None,
                   trajectories: Optional[Sequence[np.ndarray]] = None,
                   backend: Optional[SolverBackend] = None, label: Optional[str] = None):
    """Draws trajectories from `estimate` (unless given) and simulates them; returns (report, log)."""
    config = config or SimulationConfig()
    if trajectories is None:
        if estimate is None:
            raise ValueError("either trajectories or a fitted estimate is required")
        trajectories = draw_trajectories(estimate, uset, config.n_trajectories, config.seed)
    return SimulationWorkflow(system, solution, uset, config, backend).run(trajectories, label)
