# src/robust/policy.py
"""
Simplified affine dispatch policy. Generators and storage follow the total
available renewable power of their period; each renewable unit follows its
own availability with a slope shared by all units in the period.

    p_g[i,t]  = w_g[i,t]  + W_g[i,t]  * sum_j pbar[j,t]
    p_sp[s,t] = w_sp[s,t] + W_sp[s,t] * sum_j pbar[j,t]   (same for p_sm)
    p_r[j,t]  = w_r[j,t]  + W_r[t]    * pbar[j,t]
"""
from dataclasses import dataclass
from typing import Any, Dict, Mapping

import numpy as np

from src.models.constraints import Dispatch
from src.models.power_system import PowerSystem
from src.solvers.program import INF, LinearExpr, MathProgram, var_name

# Master-problem variable names
WG, SG = "wg", "Wg"
WSP, SSP = "wsp", "Wsp"
WSM, SSM = "wsm", "Wsm"
WR, SR = "wr", "Wr"
Z = "z"


def declare_policy_variables(program: MathProgram, system: PowerSystem, slope_bound: float = INF) -> None:
    T = system.horizon
    for t in range(T):
        for i in range(system.n_generators):
            program.add_free_variable(var_name(WG, i, t))
            program.add_variable(var_name(SG, i, t), -slope_bound, slope_bound)
        for s in range(system.n_storages):
            for w, W in ((WSP, SSP), (WSM, SSM)):
                program.add_free_variable(var_name(w, s, t))
                program.add_variable(var_name(W, s, t), -slope_bound, slope_bound)
        for j in range(system.n_renewables):
            program.add_free_variable(var_name(WR, j, t))
        program.add_variable(var_name(SR, t), -slope_bound, slope_bound)
    program.add_free_variable(Z)


# --- affine expressions in the master variables ---

def gen_terms(i: int, t: int):
    """(intercept, slope) expressions of generator i at period t."""
    return LinearExpr({var_name(WG, i, t): 1.0}), LinearExpr({var_name(SG, i, t): 1.0})


def storage_net_terms(s: int, t: int):
    """(intercept, slope) of discharge minus charge."""
    return (LinearExpr({var_name(WSP, s, t): 1.0, var_name(WSM, s, t): -1.0}),
            LinearExpr({var_name(SSP, s, t): 1.0, var_name(SSM, s, t): -1.0}))


def storage_energy_terms(system: PowerSystem, s: int, t: int):
    """(intercept, slope) of the stored-energy increment of period t (MWh)."""
    h, eta = system.period_length, system.efficiency[s]
    return (LinearExpr({var_name(WSM, s, t): h * eta, var_name(WSP, s, t): -h}),
            LinearExpr({var_name(SSM, s, t): h * eta, var_name(SSP, s, t): -h}))


@dataclass(frozen=True, eq=False)
class AffinePolicy:
    w_g: np.ndarray  # generator x T
    W_g: np.ndarray
    w_sp: np.ndarray  # storage x T
    W_sp: np.ndarray
    w_sm: np.ndarray
    W_sm: np.ndarray
    w_r: np.ndarray  # renewable x T
    W_r: np.ndarray  # T

    @classmethod
    def from_values(cls, system: PowerSystem, values: Mapping[str, float]) -> "AffinePolicy":
        T = system.horizon

        def grid(base: str, n: int) -> np.ndarray:
            return np.array([[values[var_name(base, i, t)] for t in range(T)] for i in range(n)],
                            dtype=float).reshape(n, T)

        G, S, R = system.n_generators, system.n_storages, system.n_renewables
        return cls(grid(WG, G), grid(SG, G), grid(WSP, S), grid(SSP, S), grid(WSM, S), grid(SSM, S),
                   grid(WR, R), np.array([values[var_name(SR, t)] for t in range(T)], dtype=float))

    @classmethod
    def constant(cls, system: PowerSystem, dispatch: Dispatch) -> "AffinePolicy":
        """Policy that ignores the uncertainty and replays a fixed dispatch plan."""
        zeros = np.zeros_like
        return cls(dispatch.generation, zeros(dispatch.generation), dispatch.discharge,
                   zeros(dispatch.discharge), dispatch.charge, zeros(dispatch.charge),
                   dispatch.renewable, np.zeros(system.horizon))

    # --- evaluation ---

    def generation(self, total) -> np.ndarray:
        """Generator output for a total-availability vector (per period)."""
        return self.w_g + self.W_g * np.asarray(total, dtype=float)[None, :]

    def discharge(self, total) -> np.ndarray:
        return self.w_sp + self.W_sp * np.asarray(total, dtype=float)[None, :]

    def charge(self, total) -> np.ndarray:
        return self.w_sm + self.W_sm * np.asarray(total, dtype=float)[None, :]

    def renewable(self, available) -> np.ndarray:
        return self.w_r + self.W_r[None, :] * np.asarray(available, dtype=float)

    def dispatch(self, available: np.ndarray) -> Dispatch:
        """Dispatch of all periods under an availability path (renewable x T)."""
        available = np.asarray(available, dtype=float).reshape(self.w_r.shape[0], -1)
        total = available.sum(axis=0)
        return Dispatch(self.generation(total), self.renewable(available), self.discharge(total),
                        self.charge(total))

    def generation_at(self, t: int, total: float) -> np.ndarray:
        return self.w_g[:, t] + self.W_g[:, t] * total

    def storage_net_energy(self, system: PowerSystem, total) -> np.ndarray:
        """eta * charge - discharge per storage and period (MWh per period)."""
        h = system.period_length
        return h * (system.efficiency[:, None] * self.charge(total) - self.discharge(total))

    def variable_values(self) -> Dict[str, float]:
        """The policy as master-problem variable values."""
        values = {}
        for base, arr in ((WG, self.w_g), (SG, self.W_g), (WSP, self.w_sp), (SSP, self.W_sp),
                          (WSM, self.w_sm), (SSM, self.W_sm), (WR, self.w_r)):
            for (i, t), v in np.ndenumerate(arr):
                values[var_name(base, i, t)] = float(v)
        for t, v in enumerate(self.W_r):
            values[var_name(SR, t)] = float(v)
        return values

    def to_dict(self) -> Dict[str, Any]:
        return {k: getattr(self, k).tolist() for k in ("w_g", "W_g", "w_sp", "W_sp", "w_sm", "W_sm", "w_r", "W_r")}

    @classmethod
    def from_dict(cls, system: PowerSystem, data: Mapping[str, Any]) -> "AffinePolicy":
        T = system.horizon
        shapes = {"w_g": system.n_generators, "W_g": system.n_generators, "w_sp": system.n_storages,
                  "W_sp": system.n_storages, "w_sm": system.n_storages, "W_sm": system.n_storages,
                  "w_r": system.n_renewables}
        arrays = {k: np.asarray(data[k], dtype=float).reshape(n, T) for k, n in shapes.items()}
        arrays["W_r"] = np.asarray(data["W_r"], dtype=float).reshape(T)
        return cls(**arrays)
