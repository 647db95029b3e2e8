# src/robust/robust_constraints.py
"""
Robust rows of the affine model, each written as

    sum_t c_t(W) * total_t(pbar) + sum_{j,t} d_jt(W) * pbar[j,t]  <=  b(x, w, z)

for every pbar in the uncertainty set. c, d and b are LinearExprs over the
master variables, so a row can be evaluated at master values (to get the
weights of the separation LP) or instantiated at a scenario (to get a cut).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Set, Tuple

import numpy as np

from src.models.power_system import PowerSystem
from src.robust.policy import (SR, WR, WSM, WSP, SSM, SSP, Z, gen_terms, storage_energy_terms,
                               storage_net_terms)
from src.solvers.program import LinearExpr, LinearRow, Sense, var_name

TRANSMISSION = "transmission"
COST = "cost"
RAMP = "ramp"
STORAGE = "storage"
BALANCE = "balance"
LIMIT = "limit"

INTERTEMPORAL = (COST, RAMP, STORAGE)


@dataclass
class RobustConstraint:
    name: str
    classification: str
    total_coeffs: Dict[int, LinearExpr]
    rhs: LinearExpr
    unit_coeffs: Dict[Tuple[int, int], LinearExpr] = field(default_factory=dict)
    pool: List[np.ndarray] = field(default_factory=list)
    looseness: Optional[float] = None
    parked: bool = False
    _pool_keys: Set[bytes] = field(default_factory=set, repr=False)

    @property
    def span(self) -> Tuple[int, int]:
        periods = list(self.total_coeffs) + [t for _, t in self.unit_coeffs]
        return min(periods), max(periods)

    @property
    def total_only(self) -> bool:
        return not self.unit_coeffs

    def weights(self, values: Mapping[str, float], n_units: int, horizon: int) -> np.ndarray:
        """Coefficient a[j,t] of each unit's availability at the given master values."""
        a = np.zeros((n_units, horizon))
        for t, expr in self.total_coeffs.items():
            a[:, t] += expr.evaluate(values)
        for (j, t), expr in self.unit_coeffs.items():
            a[j, t] += expr.evaluate(values)
        return a

    def bound(self, values: Mapping[str, float]) -> float:
        return self.rhs.evaluate(values)

    def tolerance(self, values: Mapping[str, float], eps_viol: float) -> float:
        return eps_viol * max(1.0, abs(self.bound(values)))

    def lhs_at(self, values: Mapping[str, float], available: np.ndarray) -> float:
        return float(np.sum(self.weights(values, available.shape[0], available.shape[1]) * available))

    def cut(self, available: np.ndarray, tag: str) -> LinearRow:
        """The deterministic row obtained by fixing pbar = `available`."""
        totals = available.sum(axis=0)
        expr = LinearExpr()
        for t, c in self.total_coeffs.items():
            expr.add_expr(c, float(totals[t]))
        for (j, t), d in self.unit_coeffs.items():
            expr.add_expr(d, float(available[j, t]))
        expr.add_expr(self.rhs, -1.0)
        return expr.row(f"cut[{self.name}]{tag}", Sense.LE, 0.0, "robust_cut")

    def add_scenario(self, available: np.ndarray) -> bool:
        """Adds a scenario to the pool unless an equal one (to 1e-9) is present."""
        key = (np.round(np.asarray(available, dtype=float), 9) + 0.0).tobytes()
        if key in self._pool_keys:
            return False
        self._pool_keys.add(key)
        self.pool.append(np.array(available, dtype=float))
        return True


def _x(field_name: str, i: int, t: int, system: PowerSystem, coef: float) -> LinearExpr:
    if t < 0:
        return LinearExpr(constant=coef * system.initial_on[i]) if field_name == "x_on" else LinearExpr()
    return LinearExpr({var_name(field_name, i, t): coef})


def cost_constraint(system: PowerSystem) -> RobustConstraint:
    """h * sum_t sum_i C_i p_g[i,t] <= z."""
    h = system.period_length
    coeffs: Dict[int, LinearExpr] = {}
    rhs = LinearExpr({Z: 1.0})
    for t in range(system.horizon):
        c = LinearExpr()
        for i in range(system.n_generators):
            w, W = gen_terms(i, t)
            c.add_expr(W, h * system.variable_cost[i])
            rhs.add_expr(w, -h * system.variable_cost[i])
        coeffs[t] = c
    return RobustConstraint("cost", COST, coeffs, rhs)


def ramp_constraints(system: PowerSystem) -> List[RobustConstraint]:
    h = system.period_length
    out = []
    for i in range(system.n_generators):
        for t in range(system.horizon):
            w_t, W_t = gen_terms(i, t)
            up_coeffs = {t: LinearExpr().add_expr(W_t)}
            down_coeffs = {t: W_t.scaled(-1.0)}
            # headroom terms from the commitment
            up_rhs = _x("x_on", i, t - 1, system, h * system.ramp_up[i, t])
            up_rhs.add_expr(_x("x_start", i, t, system, h * system.startup_ramp[i, t]))
            down_rhs = _x("x_on", i, t, system, h * system.ramp_down[i, t])
            down_rhs.add_expr(_x("x_shut", i, t, system, h * system.shutdown_ramp[i, t]))
            up_rhs.add_expr(w_t, -1.0)
            down_rhs.add_expr(w_t, 1.0)
            if t == 0:
                up_rhs.add_constant(system.initial_output[i])
                down_rhs.add_constant(-system.initial_output[i])
            else:
                w_p, W_p = gen_terms(i, t - 1)
                up_coeffs[t - 1] = W_p.scaled(-1.0)
                down_coeffs[t - 1] = LinearExpr().add_expr(W_p)
                up_rhs.add_expr(w_p, 1.0)
                down_rhs.add_expr(w_p, -1.0)
            out.append(RobustConstraint(f"ramp_up({i},{t})", RAMP, up_coeffs, up_rhs))
            out.append(RobustConstraint(f"ramp_down({i},{t})", RAMP, down_coeffs, down_rhs))
    return out


def storage_constraints(system: PowerSystem) -> List[RobustConstraint]:
    """0 <= q0 + sum_{tau<=t} (eta p_sm - p_sp) h <= capacity, as two rows per (s, t)."""
    out = []
    for s in range(system.n_storages):
        level_w = LinearExpr(constant=system.storage_initial[s])
        slopes: Dict[int, LinearExpr] = {}
        for t in range(system.horizon):
            w, W = storage_energy_terms(system, s, t)
            level_w.add_expr(w)
            slopes[t] = W
            upper_rhs = LinearExpr(constant=system.storage_capacity[s]).add_expr(level_w, -1.0)
            out.append(RobustConstraint(f"storage_max({s},{t})", STORAGE,
                                        {k: LinearExpr().add_expr(v) for k, v in slopes.items()}, upper_rhs))
            out.append(RobustConstraint(f"storage_min({s},{t})", STORAGE,
                                        {k: v.scaled(-1.0) for k, v in slopes.items()},
                                        LinearExpr().add_expr(level_w)))
    return out


def line_constraints(system: PowerSystem) -> List[RobustConstraint]:
    out = []
    R = system.n_renewables
    for l in range(system.n_lines):
        for t in range(system.horizon):
            slope = LinearExpr()
            intercept = LinearExpr(constant=-system.demand_flow[l, t])
            for i in range(system.n_generators):
                w, W = gen_terms(i, t)
                slope.add_expr(W, system.alpha_generator[l, i])
                intercept.add_expr(w, system.alpha_generator[l, i])
            for s in range(system.n_storages):
                w, W = storage_net_terms(s, t)
                slope.add_expr(W, system.alpha_storage[l, s])
                intercept.add_expr(w, system.alpha_storage[l, s])
            unit = {}
            for j in range(R):
                if system.alpha_renewable[l, j] != 0.0:
                    unit[(j, t)] = LinearExpr({var_name(SR, t): system.alpha_renewable[l, j]})
                intercept.add(var_name(WR, j, t), system.alpha_renewable[l, j])
            limit = system.flow_limit[l]
            out.append(RobustConstraint(
                f"line_max({l},{t})", TRANSMISSION, {t: slope},
                LinearExpr(constant=limit).add_expr(intercept, -1.0), dict(unit)))
            out.append(RobustConstraint(
                f"line_min({l},{t})", TRANSMISSION, {t: slope.scaled(-1.0)},
                LinearExpr(constant=limit).add_expr(intercept), {k: v.scaled(-1.0) for k, v in unit.items()}))
    return out


def balance_constraints(system: PowerSystem) -> List[RobustConstraint]:
    """Energy balance as a pair of opposite inequalities per period."""
    out = []
    for t in range(system.horizon):
        slope = LinearExpr({var_name(SR, t): 1.0})
        supply = LinearExpr()
        for i in range(system.n_generators):
            w, W = gen_terms(i, t)
            slope.add_expr(W)
            supply.add_expr(w)
        for s in range(system.n_storages):
            w, W = storage_net_terms(s, t)
            slope.add_expr(W)
            supply.add_expr(w)
        for j in range(system.n_renewables):
            supply.add(var_name(WR, j, t), 1.0)
        demand = system.total_demand[t]
        out.append(RobustConstraint(f"balance_hi({t})", BALANCE, {t: slope},
                                    LinearExpr(constant=demand).add_expr(supply, -1.0)))
        out.append(RobustConstraint(f"balance_lo({t})", BALANCE, {t: slope.scaled(-1.0)},
                                    LinearExpr(constant=-demand).add_expr(supply)))
    return out


def limit_constraints(system: PowerSystem) -> List[RobustConstraint]:
    """Generator, storage and renewable output limits as robust rows (for verification)."""
    out = []
    for i in range(system.n_generators):
        for t in range(system.horizon):
            w, W = gen_terms(i, t)
            out.append(RobustConstraint(f"gen_max({i},{t})", LIMIT, {t: LinearExpr().add_expr(W)},
                                        _x("x_on", i, t, system, system.p_max[i, t]).add_expr(w, -1.0)))
            out.append(RobustConstraint(f"gen_min({i},{t})", LIMIT, {t: W.scaled(-1.0)},
                                        _x("x_on", i, t, system, -system.p_min[i, t]).add_expr(w)))
    for s in range(system.n_storages):
        for t in range(system.horizon):
            for base, slope_base, lo, hi in ((WSP, SSP, system.discharge_min, system.discharge_max),
                                             (WSM, SSM, system.charge_min, system.charge_max)):
                w = LinearExpr({var_name(base, s, t): 1.0})
                W = LinearExpr({var_name(slope_base, s, t): 1.0})
                out.append(RobustConstraint(f"{base}_max({s},{t})", LIMIT, {t: LinearExpr().add_expr(W)},
                                            LinearExpr(constant=hi[s, t]).add_expr(w, -1.0)))
                out.append(RobustConstraint(f"{base}_min({s},{t})", LIMIT, {t: W.scaled(-1.0)},
                                            LinearExpr(constant=-lo[s, t]).add_expr(w)))
    for j in range(system.n_renewables):
        for t in range(system.horizon):
            w = LinearExpr({var_name(WR, j, t): 1.0})
            out.append(RobustConstraint(f"renewable_max({j},{t})", LIMIT, {},
                                        w.scaled(-1.0), {(j, t): LinearExpr({var_name(SR, t): 1.0}, -1.0)}))
            out.append(RobustConstraint(f"renewable_min({j},{t})", LIMIT, {},
                                        LinearExpr().add_expr(w), {(j, t): LinearExpr({var_name(SR, t): -1.0})}))
    return out


def all_robust_constraints(system: PowerSystem) -> List[RobustConstraint]:
    return (limit_constraints(system) + balance_constraints(system) + [cost_constraint(system)]
            + ramp_constraints(system) + storage_constraints(system) + line_constraints(system))
