# src/robust/reformulations.py
"""
Deterministic replacements for robust rows.

- Generation, storage and renewable limits depend on one scalar of the set
  each, so checking the interval endpoints is exact.
- Energy balance holds for every member of a full-dimensional set iff the
  intercepts cover demand and the slopes cancel.
- Inter-temporal rows (cost, ramping, storage) are dualized over the outer
  approximation built from the total and delta extrema.
- Any row can also be dualized exactly over the set polyhedron; this is the
  slow comparison path.
"""
import re
from typing import List

import numpy as np

from src.models.power_system import PowerSystem
from src.robust.policy import SG, SR, SSM, SSP, WG, WR, WSM, WSP
from src.robust.robust_constraints import RobustConstraint
from src.solvers.program import INF, LinearExpr, LinearRow, MathProgram, Sense, var_name
from src.uncertainty.dynamic_set import DynamicUncertaintySet, SetExtrema
from src.utils.logging_config import logger

FULL_DIMENSION_TOL = 1e-9


def _tag(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_]", "_", name).strip("_")


def _interval_rows(name: str, intercept: LinearExpr, slope: LinearExpr, lower: LinearExpr,
                   upper: LinearExpr, points, kind: str) -> List[LinearRow]:
    """lower <= intercept + slope * p <= upper at each interval endpoint p."""
    rows = []
    for k, p in enumerate(dict.fromkeys(float(x) for x in points)):
        value = LinearExpr().add_expr(intercept).add_expr(slope, p)
        rows.append(LinearExpr().add_expr(value).add_expr(upper, -1.0).row(f"{name}_hi[{k}]", Sense.LE, 0.0, kind))
        rows.append(LinearExpr().add_expr(value).add_expr(lower, -1.0).row(f"{name}_lo[{k}]", Sense.GE, 0.0, kind))
    return rows


def reformulate_generation_limits(system: PowerSystem, extrema: SetExtrema) -> List[LinearRow]:
    """Rows equivalent to the robust output limits of generators, storage and renewable units."""
    if extrema is None:
        raise ValueError("set extrema are required for the generation-limit reformulation")
    if extrema.horizon != system.horizon:
        raise ValueError(f"extrema cover {extrema.horizon} periods, system has {system.horizon}")
    rows: List[LinearRow] = []
    for t in range(system.horizon):
        ends = (extrema.total_min[t], extrema.total_max[t])
        for i in range(system.n_generators):
            on = var_name("x_on", i, t)
            rows += _interval_rows(
                f"gen_limit({i},{t})", LinearExpr({var_name(WG, i, t): 1.0}), LinearExpr({var_name(SG, i, t): 1.0}),
                LinearExpr({on: system.p_min[i, t]}), LinearExpr({on: system.p_max[i, t]}), ends, "limit")
        for s in range(system.n_storages):
            for base, slope, lo, hi in ((WSP, SSP, system.discharge_min, system.discharge_max),
                                        (WSM, SSM, system.charge_min, system.charge_max)):
                rows += _interval_rows(
                    f"{base}_limit({s},{t})", LinearExpr({var_name(base, s, t): 1.0}),
                    LinearExpr({var_name(slope, s, t): 1.0}), LinearExpr(constant=lo[s, t]),
                    LinearExpr(constant=hi[s, t]), ends, "limit")
        for j in range(system.n_renewables):
            # 0 <= w + (W - 1) * pbar  and  w + W * pbar >= 0 over the unit's own interval
            unit_ends = (extrema.unit_min[j, t], extrema.unit_max[j, t])
            w = LinearExpr({var_name(WR, j, t): 1.0})
            for k, p in enumerate(dict.fromkeys(float(x) for x in unit_ends)):
                rows.append(LinearExpr().add_expr(w).add(var_name(SR, t), p)
                            .row(f"renewable_limit({j},{t})_hi[{k}]", Sense.LE, p, "limit"))
                rows.append(LinearExpr().add_expr(w).add(var_name(SR, t), p)
                            .row(f"renewable_limit({j},{t})_lo[{k}]", Sense.GE, 0.0, "limit"))
    return rows


def is_full_dimensional(uset: DynamicUncertaintySet, extrema: SetExtrema) -> bool:
    """Whether the total availability has spread in every period."""
    if uset.n_units == 0 or uset.is_degenerate:
        return False
    return bool(np.all(extrema.total_max - extrema.total_min > FULL_DIMENSION_TOL))


def reformulate_energy_balance(system: PowerSystem) -> List[LinearRow]:
    rows = []
    for t in range(system.horizon):
        intercept = LinearExpr()
        slope = LinearExpr({var_name(SR, t): 1.0})
        for i in range(system.n_generators):
            intercept.add(var_name(WG, i, t), 1.0)
            slope.add(var_name(SG, i, t), 1.0)
        for j in range(system.n_renewables):
            intercept.add(var_name(WR, j, t), 1.0)
        for s in range(system.n_storages):
            intercept.add(var_name(WSP, s, t), 1.0).add(var_name(WSM, s, t), -1.0)
            slope.add(var_name(SSP, s, t), 1.0).add(var_name(SSM, s, t), -1.0)
        rows.append(intercept.row(f"balance_intercept({t})", Sense.EQ, float(system.total_demand[t]), "balance"))
        rows.append(slope.row(f"balance_slope({t})", Sense.EQ, 0.0, "balance"))
    return rows


def outer_approximation_rows(constraint: RobustConstraint, extrema: SetExtrema,
                             program: MathProgram) -> List[LinearRow]:
    """
    Declares the multipliers of `constraint` in `program` and returns the
    rows that imply it over the box-and-delta outer approximation of the
    total availability on the constraint's span.
    """
    if not constraint.total_only:
        raise ValueError(f"{constraint.name}: outer approximation needs total-only coefficients")
    t1, t2 = constraint.span
    if t1 > t2:
        raise ValueError(f"{constraint.name}: empty span [{t1}, {t2}]")
    tag = _tag(constraint.name)
    names = {}
    for t in range(t1, t2 + 1):
        for key in ("pi_hi", "pi_lo"):
            names[key, t] = program.add_variable(var_name(f"{key}_{tag}", t), 0.0, INF)
        if t > t1:
            for key in ("phi_hi", "phi_lo"):
                names[key, t] = program.add_variable(var_name(f"{key}_{tag}", t), 0.0, INF)

    budget = LinearExpr()
    rows = []
    for t in range(t1, t2 + 1):
        budget.add(names["pi_hi", t], extrema.total_max[t]).add(names["pi_lo", t], -extrema.total_min[t])
        station = LinearExpr().add(names["pi_hi", t], 1.0).add(names["pi_lo", t], -1.0)
        if t > t1:
            budget.add(names["phi_hi", t], extrema.delta_max[t - 1]).add(names["phi_lo", t], -extrema.delta_min[t - 1])
            station.add(names["phi_hi", t], 1.0).add(names["phi_lo", t], -1.0)
        if t < t2:
            station.add(names["phi_hi", t + 1], -1.0).add(names["phi_lo", t + 1], 1.0)
        coeff = constraint.total_coeffs.get(t)
        if coeff is not None:
            station.add_expr(coeff, -1.0)
        rows.append(station.row(f"oa_station_{tag}({t})", Sense.EQ, 0.0, "oa_dual"))
    budget.add_expr(constraint.rhs, -1.0)
    rows.append(budget.row(f"oa_budget_{tag}", Sense.LE, 0.0, "oa_dual"))
    return rows


def exact_dual_rows(constraint: RobustConstraint, uset: DynamicUncertaintySet,
                    program: MathProgram) -> List[LinearRow]:
    """
    LP-duality rows of `constraint` over the whole set polyhedron: a
    multiplier per set row and per finite variable bound.
    """
    template = uset.lp_program()
    R, T = uset.n_units, uset.horizon
    tag = _tag(constraint.name)

    # objective coefficient of each set variable, as an expression in the master variables
    target = {}
    for j in range(R):
        for t in range(T):
            expr = LinearExpr()
            if t in constraint.total_coeffs:
                expr.add_expr(constraint.total_coeffs[t])
            if (j, t) in constraint.unit_coeffs:
                expr.add_expr(constraint.unit_coeffs[(j, t)])
            if expr.coeffs or expr.constant:
                target[var_name("p", j, t)] = expr

    station = {name: LinearExpr() for name in template.variable_names()}
    objective = LinearExpr()
    for k, row in enumerate(template.rows):
        lb, ub = {Sense.LE: (0.0, INF), Sense.GE: (-INF, 0.0), Sense.EQ: (-INF, INF)}[row.sense]
        mu = program.add_variable(var_name(f"mu_{tag}", k), lb, ub)
        objective.add(mu, row.rhs)
        for v, c in row.coeffs.items():
            station[v].add(mu, c)
    for name, var in template.variables.items():
        if var.ub < INF:
            nu = program.add_variable(var_name(f"nu_hi_{tag}", template.index(name)), 0.0, INF)
            objective.add(nu, var.ub)
            station[name].add(nu, 1.0)
        if var.lb > -INF:
            nu = program.add_variable(var_name(f"nu_lo_{tag}", template.index(name)), 0.0, INF)
            objective.add(nu, -var.lb)
            station[name].add(nu, -1.0)

    rows = []
    for name, expr in station.items():
        coeff = target.get(name)
        if coeff is not None:
            expr.add_expr(coeff, -1.0)
        rows.append(expr.row(f"dual_station_{tag}({template.index(name)})", Sense.EQ, 0.0, "exact_dual"))
    objective.add_expr(constraint.rhs, -1.0)
    rows.append(objective.row(f"dual_budget_{tag}", Sense.LE, 0.0, "exact_dual"))
    logger.debug(f"{constraint.name}: exact dual with {len(template.rows)} set rows")
    return rows
