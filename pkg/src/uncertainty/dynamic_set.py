# src/uncertainty/dynamic_set.py
"""
Dynamic uncertainty set for available renewable power.

    p_t = f_t + g_t * u_t                          (elementwise, unit x period)
    u_t = sum_l A_l u_{t-l} + B v_t
    ||v_t|| <= s_t <= gamma,  sum_t s_t <= rho * gamma * T
    0 <= p_t <= p_max_t

Every norm except l2 is linearised with auxiliary variables, so the set is a
polyhedron and the oracles below are LPs. Pre-horizon lags u_{-1}, u_{-2}, ...
are data (`initial_lags`, most recent first).
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.solvers.base import SolverBackend, SolveStatus
from src.solvers.highs_backend import HighsBackend
from src.solvers.program import INF, LinearExpr, MathProgram, Sense, var_name
from src.utils.exceptions import BackendError, UncertaintySetError
from src.utils.logging_config import logger

NormKind = Literal["l1", "l2", "linf", "l1_linf"]
POLYHEDRAL_NORMS = ("l1", "linf", "l1_linf")


def vector_norm(v: np.ndarray, kind: str) -> float:
    """The set's norm of one period's innovation vector."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    if kind == "l1":
        return float(np.abs(v).sum())
    if kind == "l2":
        return float(np.linalg.norm(v))
    if kind == "linf":
        return float(np.abs(v).max())
    if kind == "l1_linf":
        return max(float(np.abs(v).sum()) / math.sqrt(v.size), float(np.abs(v).max()))
    raise UncertaintySetError(f"Unknown norm '{kind}'")


@dataclass(frozen=True)
class ScenarioPath:
    """Available renewable power (unit x period), optionally with the latent u/v paths."""

    available: np.ndarray
    u: Optional[np.ndarray] = None
    v: Optional[np.ndarray] = None

    @property
    def total(self) -> np.ndarray:
        return self.available.sum(axis=0)


@dataclass(frozen=True)
class SetExtrema:
    """Per-period bounds of the set's projections used by the reformulations and screening."""

    total_min: np.ndarray  # T
    total_max: np.ndarray  # T
    delta_min: np.ndarray  # T-1, bounds of total_t - total_{t-1}
    delta_max: np.ndarray  # T-1
    unit_min: np.ndarray  # unit x T
    unit_max: np.ndarray  # unit x T
    lp_count: int = 0

    @property
    def horizon(self) -> int:
        return len(self.total_min)


@dataclass(frozen=True, eq=False)
class DynamicUncertaintySet:
    f: np.ndarray  # unit x period
    g: np.ndarray  # unit x period
    A: np.ndarray  # lag x unit x unit
    B: np.ndarray  # unit x n_v
    gamma: float
    rho: float
    p_max: np.ndarray  # unit x period
    norm: str = "l1_linf"
    initial_lags: Optional[np.ndarray] = None  # lag x unit, row 0 = u_{-1}
    # Overrides rho * gamma * T (used when conditioning on a spent budget)
    budget_total: Optional[float] = None
    unit_ids: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.f, dtype=float))
        R, T = f.shape
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", np.asarray(self.g, dtype=float).reshape(R, T))
        object.__setattr__(self, "p_max", np.asarray(self.p_max, dtype=float).reshape(R, T))
        A = np.asarray(self.A, dtype=float)
        if A.ndim == 2 and A.size:
            A = A[None]
        A = A.reshape(A.shape[0] if A.size else 0, R, R)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float).reshape(R, -1) if R else np.zeros((0, 0)))
        lags = np.zeros((A.shape[0], R)) if self.initial_lags is None else \
            np.asarray(self.initial_lags, dtype=float).reshape(A.shape[0], R)
        object.__setattr__(self, "initial_lags", lags)

        if np.any(self.g < 0):
            raise UncertaintySetError("g must be nonnegative")
        if np.any(self.p_max < 0):
            raise UncertaintySetError("p_max bounds must be nonnegative")
        if self.gamma < 0:
            raise UncertaintySetError(f"gamma must be >= 0, got {self.gamma}")
        if not 0 < self.rho <= 1:
            raise UncertaintySetError(f"rho must lie in (0, 1], got {self.rho}")
        if R and not 1 <= self.B.shape[1] <= R:
            raise UncertaintySetError(f"n_v must lie in [1, {R}], got {self.B.shape[1]}")
        if self.norm not in ("l1", "l2", "linf", "l1_linf"):
            raise UncertaintySetError(f"Unknown norm '{self.norm}'")
        if self.unit_ids and len(self.unit_ids) != R:
            raise UncertaintySetError("unit_ids length does not match f")

    # --- constructors ---

    @classmethod
    def static(cls, f, g, p_max, gamma: float, norm: str = "l1_linf", unit_ids: Sequence[str] = ()) -> "DynamicUncertaintySet":
        """Period-separable budget set: no lags, B = I, rho = 1."""
        f = np.atleast_2d(np.asarray(f, dtype=float))
        R = f.shape[0]
        return cls(f=f, g=g, A=np.zeros((0, R, R)), B=np.eye(R), gamma=gamma, rho=1.0,
                   p_max=p_max, norm=norm, unit_ids=tuple(unit_ids))

    # --- sizes ---

    @property
    def n_units(self) -> int:
        return self.f.shape[0]

    @property
    def horizon(self) -> int:
        return self.f.shape[1]

    @property
    def lag(self) -> int:
        return self.A.shape[0]

    @property
    def n_v(self) -> int:
        return self.B.shape[1]

    @property
    def budget(self) -> float:
        if self.budget_total is not None:
            return self.budget_total
        return self.rho * self.gamma * self.horizon

    @property
    def is_polyhedral(self) -> bool:
        return self.norm in POLYHEDRAL_NORMS

    @property
    def is_degenerate(self) -> bool:
        """True when the set cannot be full-dimensional (no spread in some coordinate)."""
        return self.gamma == 0 or bool(np.any(self.g <= 0)) or self.budget <= 0

    def lag_value(self, t: int, l: int) -> Optional[np.ndarray]:
        """u_{t-l} when it lies before the horizon, else None."""
        k = l - t - 1
        return self.initial_lags[k] if k >= 0 else None

    # --- LP representation ---

    def _require_polyhedral(self) -> None:
        if not self.is_polyhedral:
            raise UncertaintySetError(
                f"Norm '{self.norm}' is not polyhedral; LP oracles support l1, linf and l1_linf")

    def add_to_program(self, program: MathProgram, prefix: str = "") -> None:
        """Declares p/u/v/s (and a) variables and all set rows inside `program`."""
        self._require_polyhedral()
        R, T, L, K = self.n_units, self.horizon, self.lag, self.n_v
        P, U, V, S, AUX = (prefix + n for n in ("p", "u", "v", "s", "a"))
        for t in range(T):
            for j in range(R):
                program.add_variable(var_name(P, j, t), 0.0, float(self.p_max[j, t]))
                program.add_variable(var_name(U, j, t), -INF, INF)
            for k in range(K):
                program.add_variable(var_name(V, k, t), -INF, INF)
                if self.norm != "linf":
                    program.add_variable(var_name(AUX, k, t), 0.0, INF)
            program.add_variable(var_name(S, t), 0.0, float(self.gamma))

        sqrt_k = math.sqrt(K) if K else 1.0
        for t in range(T):
            for j in range(R):
                program.add_row(LinearExpr().add(var_name(P, j, t), 1.0).add(var_name(U, j, t), -self.g[j, t])
                                .row(f"{prefix}p_def({j},{t})", Sense.EQ, self.f[j, t], "set"))
                dyn = LinearExpr().add(var_name(U, j, t), 1.0)
                for l in range(1, L + 1):
                    prior = self.lag_value(t, l)
                    for m in range(R):
                        if self.A[l - 1, j, m] == 0.0:
                            continue
                        if prior is None:
                            dyn.add(var_name(U, m, t - l), -self.A[l - 1, j, m])
                        else:
                            dyn.add_constant(-self.A[l - 1, j, m] * prior[m])
                for k in range(K):
                    dyn.add(var_name(V, k, t), -self.B[j, k])
                program.add_row(dyn.row(f"{prefix}dynamics({j},{t})", Sense.EQ, 0.0, "set"))

            s = var_name(S, t)
            if self.norm == "linf":
                for k in range(K):
                    v = var_name(V, k, t)
                    program.add_row(LinearExpr().add(v, 1.0).add(s, -1.0).row(f"{prefix}v_hi({k},{t})", Sense.LE, 0.0, "set"))
                    program.add_row(LinearExpr().add(v, 1.0).add(s, 1.0).row(f"{prefix}v_lo({k},{t})", Sense.GE, 0.0, "set"))
                continue
            total = LinearExpr()
            for k in range(K):
                v, a = var_name(V, k, t), var_name(AUX, k, t)
                program.add_row(LinearExpr().add(a, 1.0).add(v, -1.0).row(f"{prefix}abs_hi({k},{t})", Sense.GE, 0.0, "set"))
                program.add_row(LinearExpr().add(a, 1.0).add(v, 1.0).row(f"{prefix}abs_lo({k},{t})", Sense.GE, 0.0, "set"))
                if self.norm == "l1_linf":
                    program.add_row(LinearExpr().add(a, 1.0).add(s, -1.0).row(f"{prefix}inf_cap({k},{t})", Sense.LE, 0.0, "set"))
                total.add(a, 1.0)
            scale = sqrt_k if self.norm == "l1_linf" else 1.0
            program.add_row(total.add(s, -scale).row(f"{prefix}l1_cap({t})", Sense.LE, 0.0, "set"))

        budget = LinearExpr()
        for t in range(T):
            budget.add(var_name(S, t), 1.0)
        program.add_row(budget.row(f"{prefix}budget", Sense.LE, self.budget, "set"))

    @cached_property
    def _template(self) -> MathProgram:
        program = MathProgram("uncertainty_set")
        self.add_to_program(program)
        program.standard_form()  # clones share the lowered matrix
        return program

    def lp_program(self) -> MathProgram:
        """The set as an LP over p/u/v/s/a with no objective (shared, do not mutate)."""
        self._require_polyhedral()
        return self._template

    def _read_path(self, values) -> ScenarioPath:
        R, T, K = self.n_units, self.horizon, self.n_v
        p = np.array([[values[var_name("p", j, t)] for t in range(T)] for j in range(R)]).reshape(R, T)
        u = np.array([[values[var_name("u", j, t)] for t in range(T)] for j in range(R)]).reshape(R, T)
        v = np.array([[values[var_name("v", k, t)] for t in range(T)] for k in range(K)]).reshape(K, T)
        return ScenarioPath(available=p, u=u, v=v)

    # --- oracles ---

    def maximize_linear(self, weights: np.ndarray, backend: Optional[SolverBackend] = None) -> Tuple[float, ScenarioPath]:
        """max sum(weights * p) over the set; returns the optimum and an optimal vertex."""
        self._require_polyhedral()
        weights = np.asarray(weights, dtype=float).reshape(self.n_units, self.horizon)
        if self.n_units == 0:
            return 0.0, ScenarioPath(available=np.zeros((0, self.horizon)))
        backend = backend or HighsBackend()
        objective = {var_name("p", j, t): -weights[j, t]
                     for j in range(self.n_units) for t in range(self.horizon) if weights[j, t] != 0.0}
        program = self._template.with_objective(objective)
        result = backend.solve(program)
        if result.status is SolveStatus.INFEASIBLE:
            raise UncertaintySetError("Uncertainty set is empty (LP infeasible); check f, p_max and initial lags")
        if result.status is SolveStatus.UNBOUNDED:
            raise BackendError("Separation LP reported unbounded over a bounded set")
        if result.status is not SolveStatus.OPTIMAL:
            raise BackendError(f"Separation LP did not finish: {result.message}")
        return -result.objective, self._read_path(result.values)

    def evaluate_many(self, weight_list: Sequence[np.ndarray], backend: Optional[SolverBackend] = None,
                      workers: int = 1) -> List[Tuple[float, ScenarioPath]]:
        """maximize_linear over several weight tensors, optionally on a thread pool."""
        backend = backend or HighsBackend()
        if workers <= 1 or len(weight_list) <= 1:
            return [self.maximize_linear(w, backend) for w in weight_list]
        self._template  # build once before fanning out
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda w: self.maximize_linear(w, backend.spawn()), weight_list))

    def forecast_path(self) -> ScenarioPath:
        """The zero-innovation path (v = 0) from the initial lags, clipped to the bounds."""
        u = np.zeros((self.n_units, self.horizon))
        for t in range(self.horizon):
            for l in range(1, self.lag + 1):
                prior = self.lag_value(t, l)
                u[:, t] += self.A[l - 1] @ (prior if prior is not None else u[:, t - l])
        p = np.clip(self.f + self.g * u, 0.0, self.p_max)
        return ScenarioPath(available=p, u=u, v=np.zeros((self.n_v, self.horizon)))

    def contains(self, available: np.ndarray, tol: float = 1e-6) -> bool:
        """Membership test through an LP with p fixed to `available`."""
        available = np.asarray(available, dtype=float).reshape(self.n_units, self.horizon)
        if np.any(available < -tol) or np.any(available > self.p_max + tol):
            return False
        program = self._template.copy()
        for j in range(self.n_units):
            for t in range(self.horizon):
                program.add_row(LinearExpr().add(var_name("p", j, t), 1.0)
                                .row(f"fix({j},{t})", Sense.EQ, float(np.clip(available[j, t], 0.0, self.p_max[j, t]))))
        program.set_objective({})
        return HighsBackend().solve(program).status is SolveStatus.OPTIMAL

    def slice_period(self, t: int) -> "DynamicUncertaintySet":
        """The one-period set of period t when no history is known (L = 0 case)."""
        sl = slice(t, t + 1)
        return DynamicUncertaintySet(f=self.f[:, sl], g=self.g[:, sl], A=self.A, B=self.B, gamma=self.gamma,
                                     rho=1.0, p_max=self.p_max[:, sl], norm=self.norm,
                                     initial_lags=self.initial_lags, unit_ids=self.unit_ids)

    def with_gamma(self, gamma: float) -> "DynamicUncertaintySet":
        return DynamicUncertaintySet(f=self.f, g=self.g, A=self.A, B=self.B, gamma=gamma, rho=self.rho,
                                     p_max=self.p_max, norm=self.norm, initial_lags=self.initial_lags,
                                     unit_ids=self.unit_ids)

    def to_dict(self) -> dict:
        return {
            "f": self.f.tolist(), "g": self.g.tolist(), "A": self.A.tolist(), "B": self.B.tolist(),
            "gamma": self.gamma, "rho": self.rho, "p_max": self.p_max.tolist(), "norm": self.norm,
            "initial_lags": self.initial_lags.tolist(), "budget_total": self.budget_total,
            "unit_ids": list(self.unit_ids),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DynamicUncertaintySet":
        data = dict(data)
        data["unit_ids"] = tuple(data.get("unit_ids", ()))
        return cls(**data)


# --- projections ---


def set_extrema(uset: DynamicUncertaintySet, backend: Optional[SolverBackend] = None,
                include_units: bool = True, workers: int = 1) -> SetExtrema:
    """
    Bounds of the per-period totals, the period-to-period change of the
    totals and (optionally) each unit's availability, one LP per bound.
    """
    R, T = uset.n_units, uset.horizon
    if R == 0:
        zeros = np.zeros(T)
        return SetExtrema(zeros, zeros.copy(), np.zeros(max(T - 1, 0)), np.zeros(max(T - 1, 0)),
                          np.zeros((0, T)), np.zeros((0, T)))

    weights = []
    for t in range(T):
        w = np.zeros((R, T))
        w[:, t] = 1.0
        weights += [w, -w]
    for t in range(1, T):
        w = np.zeros((R, T))
        w[:, t], w[:, t - 1] = 1.0, -1.0
        weights += [w, -w]
    if include_units:
        for j in range(R):
            for t in range(T):
                w = np.zeros((R, T))
                w[j, t] = 1.0
                weights += [w, -w]

    values = [v for v, _ in uset.evaluate_many(weights, backend, workers)]
    it = iter(values)
    total_max, total_min = np.zeros(T), np.zeros(T)
    for t in range(T):
        total_max[t], total_min[t] = next(it), -next(it)
    delta_max, delta_min = np.zeros(max(T - 1, 0)), np.zeros(max(T - 1, 0))
    for t in range(1, T):
        delta_max[t - 1], delta_min[t - 1] = next(it), -next(it)
    if include_units:
        unit_max, unit_min = np.zeros((R, T)), np.zeros((R, T))
        for j in range(R):
            for t in range(T):
                unit_max[j, t], unit_min[j, t] = next(it), -next(it)
    else:
        unit_min, unit_max = np.zeros((R, T)), uset.p_max.copy()

    # LP round-off can put min a hair above max on degenerate sets
    total_min = np.minimum(total_min, total_max)
    delta_min = np.minimum(delta_min, delta_max)
    unit_min = np.minimum(unit_min, unit_max)
    logger.debug(f"Set extrema computed with {len(weights)} LPs")
    return SetExtrema(total_min, total_max, delta_min, delta_max, unit_min, unit_max, lp_count=len(weights))


def realized_innovations(uset: DynamicUncertaintySet, u: np.ndarray) -> np.ndarray:
    """Least-squares v_t recovered from a latent path u (unit x periods)."""
    u = np.asarray(u, dtype=float).reshape(uset.n_units, -1)
    v = np.zeros((uset.n_v, u.shape[1]))
    for t in range(u.shape[1]):
        resid = u[:, t].copy()
        for l in range(1, uset.lag + 1):
            prior = uset.lag_value(t, l)
            resid -= uset.A[l - 1] @ (prior if prior is not None else u[:, t - l])
        v[:, t] = np.linalg.lstsq(uset.B, resid, rcond=None)[0]
    return v


def latent_from_available(uset: DynamicUncertaintySet, realized: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """u = (p - f) / g over the realized periods; g = 0 requires p = f."""
    n = realized.shape[1]
    f, g = uset.f[:, :n], uset.g[:, :n]
    u = np.zeros_like(realized)
    positive = g > 0
    u[positive] = (realized[positive] - f[positive]) / g[positive]
    bad = ~positive & (np.abs(realized - f) > tol * np.maximum(1.0, np.abs(f)))
    if np.any(bad):
        j, t = np.argwhere(bad)[0]
        raise UncertaintySetError(
            f"Inconsistent history: unit {j} at period {t} has g = 0 but available {realized[j, t]} != f {f[j, t]}")
    return u


def condition_on_history(uset: DynamicUncertaintySet, realized: np.ndarray,
                         budget_mode: str = "per_period") -> DynamicUncertaintySet:
    """
    The one-period set of period t+1 given availability realized over
    periods 0..t (columns of `realized`). Lags are fixed to the realized
    latent values; "per_period" keeps only the per-period cap gamma,
    "remaining" caps by what is left of the total budget.
    """
    realized = np.asarray(realized, dtype=float).reshape(uset.n_units, -1)
    t = realized.shape[1] - 1
    if not 0 <= t < uset.horizon - 1:
        raise IndexError(f"cannot condition on {t + 1} realized periods with horizon {uset.horizon}")

    bounds = uset.p_max[:, :t + 1]
    clipped = np.clip(realized, 0.0, bounds)
    if np.any(np.abs(clipped - realized) > 1e-9):
        logger.warning(f"Realized availability outside [0, p_max] clipped before conditioning at t={t}")
    u = latent_from_available(uset, clipped)

    L = uset.lag
    lags = np.zeros((L, uset.n_units))
    for l in range(1, L + 1):
        tau = t + 1 - l
        lags[l - 1] = u[:, tau] if tau >= 0 else uset.lag_value(t + 1, l)

    budget = None
    if budget_mode == "remaining":
        v = realized_innovations(uset, u)
        spent = sum(vector_norm(v[:, k], uset.norm) for k in range(v.shape[1]))
        budget = float(np.clip(uset.rho * uset.gamma * uset.horizon - spent, 0.0, uset.gamma))
    elif budget_mode != "per_period":
        raise UncertaintySetError(f"Unknown budget mode '{budget_mode}'")

    sl = slice(t + 1, t + 2)
    return DynamicUncertaintySet(f=uset.f[:, sl], g=uset.g[:, sl], A=uset.A, B=uset.B, gamma=uset.gamma,
                                 rho=1.0, p_max=uset.p_max[:, sl], norm=uset.norm, initial_lags=lags,
                                 budget_total=budget, unit_ids=uset.unit_ids)


def conditioned_total_range(uset: DynamicUncertaintySet, realized: np.ndarray,
                            backend: Optional[SolverBackend] = None,
                            budget_mode: str = "per_period") -> Tuple[float, float]:
    """[min, max] of total availability at t+1 given history up to t."""
    cond = condition_on_history(uset, realized, budget_mode)
    if cond.n_units == 0:
        return 0.0, 0.0
    ones = np.ones((cond.n_units, 1))
    hi, _ = cond.maximize_linear(ones, backend)
    lo, _ = cond.maximize_linear(-ones, backend)
    return min(-lo, hi), hi
