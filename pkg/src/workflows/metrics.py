# src/workflows/metrics.py
"""
Simulation metrics, all recomputable from the per-period dispatch log.

Log columns: trajectory, period, dispatch_cost, penalty_mw, penalty_cost,
renewable_used, renewable_available, stored_avg_mwh.
"""
import math
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel

from src.utils.file_utils import markdown_table

LOG_COLUMNS = ("trajectory", "period", "dispatch_cost", "penalty_mw", "penalty_cost",
               "renewable_used", "renewable_available", "stored_avg_mwh")
PENALTY_TOL = 1e-6


def cvar(totals: Sequence[float], level: float = 0.1) -> float:
    """Mean of the ceil(level * N) largest values."""
    values = np.sort(np.asarray(totals, dtype=float))[::-1]
    if values.size == 0:
        raise ValueError("CVaR of an empty sample")
    if not 0 < level <= 1:
        raise ValueError(f"CVaR level must lie in (0, 1], got {level}")
    k = max(1, math.ceil(level * values.size - 1e-9))
    return float(values[:k].mean())


def trajectory_totals(log: pd.DataFrame, commitment_cost: float) -> pd.Series:
    """Commitment + dispatch + penalty cost of every trajectory."""
    per = log.groupby("trajectory")[["dispatch_cost", "penalty_cost"]].sum()
    return commitment_cost + per["dispatch_cost"] + per["penalty_cost"]


def compute_metrics(log: pd.DataFrame, commitment_cost: float, cvar_level: float = 0.1) -> Dict[str, float]:
    totals = trajectory_totals(log, commitment_cost)
    penalties = log.groupby("trajectory")["penalty_cost"].sum()
    available = float(log["renewable_available"].sum())
    return {
        "cost_avg": float(totals.mean()),
        "cost_std": float(totals.std(ddof=1)) if len(totals) > 1 else 0.0,
        "cost_cvar": cvar(totals.to_numpy(), cvar_level),
        "penalty_cost_avg": float(penalties.mean()),
        # share of (trajectory, period) pairs with any penalised MW
        "penalty_freq": float((log["penalty_mw"] > PENALTY_TOL).mean()),
        "renewables_util": float(log["renewable_used"].sum()) / available if available > 0 else 1.0,
        "stored_avg": float(log["stored_avg_mwh"].mean()),
    }


class SimulationReport(BaseModel):
    label: str
    n_trajectories: int
    commitment_cost: float
    total_costs: List[float] = []
    cost_avg: float = 0.0
    cost_std: float = 0.0
    cost_cvar: float = 0.0
    penalty_cost_avg: float = 0.0
    penalty_freq: float = 0.0
    renewables_util: float = 0.0
    stored_avg: float = 0.0
    failed_trajectories: List[int] = []
    partial: bool = False
    errors: List[str] = []

    @classmethod
    def from_log(cls, label: str, log: pd.DataFrame, commitment_cost: float, n_trajectories: int,
                 cvar_level: float = 0.1, failed: Sequence[int] = (), errors: Sequence[str] = ()) -> "SimulationReport":
        report = cls(label=label, n_trajectories=n_trajectories, commitment_cost=commitment_cost,
                     failed_trajectories=list(failed), partial=bool(failed), errors=list(errors))
        if log.empty:
            return report
        metrics = compute_metrics(log, commitment_cost, cvar_level)
        totals = trajectory_totals(log, commitment_cost)
        return report.model_copy(update={**metrics, "total_costs": [float(v) for v in totals]})

    def summary_row(self) -> Dict[str, object]:
        return {
            "Model": self.label,
            "Cost Avg": self.cost_avg,
            "Cost Std": self.cost_std,
            "Cost CVaR": self.cost_cvar,
            "Penalty Cost Avg": self.penalty_cost_avg,
            "Penalty Freq": f"{100 * self.penalty_freq:.2f}%",
            "Renewables Util": f"{100 * self.renewables_util:.2f}%",
            "Stored Avg": self.stored_avg,
        }


def summary_table(reports: Sequence[SimulationReport]) -> pd.DataFrame:
    return pd.DataFrame([r.summary_row() for r in reports])


def summary_markdown(reports: Sequence[SimulationReport]) -> str:
    return markdown_table(summary_table(reports))
