# src/uncertainty/estimation.py
"""
Data-driven estimation of the stochastic availability model:

    p_t = f_t + g_t * u_t,    u_t = sum_l A_l u_{t-l} + eps_t,   eps_t ~ N(0, Sigma)

f and g are hour-of-day means and standard deviations per unit, A by
least squares without intercept, Sigma from the residuals, and the
innovation matrix B from a (truncated) eigen-factor of Sigma.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.uncertainty.dynamic_set import DynamicUncertaintySet
from src.utils.exceptions import DataParseError, EstimationError
from src.utils.file_utils import load_document, save_json
from src.utils.logging_config import logger

RIDGE = 1e-8
G_FLOOR_FACTOR = 1e-6


@dataclass(frozen=True, eq=False)
class SeasonalFit:
    f_cycle: np.ndarray  # unit x period_cycle
    g_cycle: np.ndarray
    flagged_units: Tuple[int, ...] = ()  # units whose g was floored everywhere

    @property
    def period_cycle(self) -> int:
        return self.f_cycle.shape[1]

    def tile(self, horizon: int, offset: int = 0) -> Tuple[np.ndarray, np.ndarray]:
        """f and g over `horizon` periods, the first period having hour-of-day `offset`."""
        idx = (np.arange(horizon) + offset) % self.period_cycle
        return self.f_cycle[:, idx], self.g_cycle[:, idx]

    def normalize(self, history: np.ndarray, offset: int = 0) -> np.ndarray:
        f, g = self.tile(history.shape[1], offset)
        return (history - f) / g


def estimate_seasonal(history: np.ndarray, period_cycle: int) -> SeasonalFit:
    """Per-unit hour-of-day sample mean and sample standard deviation."""
    history = np.atleast_2d(np.asarray(history, dtype=float))
    R, N = history.shape
    if period_cycle < 1:
        raise EstimationError(f"period_cycle must be >= 1, got {period_cycle}")
    if N < 2 * period_cycle:
        raise EstimationError(
            f"Need at least two full cycles ({2 * period_cycle} periods) of history, got {N}")
    if not np.all(np.isfinite(history)):
        raise EstimationError("History contains non-finite values")

    f = np.zeros((R, period_cycle))
    g = np.zeros((R, period_cycle))
    hours = np.arange(N) % period_cycle
    for h in range(period_cycle):
        block = history[:, hours == h]
        f[:, h] = block.mean(axis=1)
        g[:, h] = block.std(axis=1, ddof=1)

    floor = G_FLOOR_FACTOR * np.maximum(f, 1.0)
    floored = g < floor
    flagged = tuple(int(j) for j in range(R) if floored[j].all())
    if floored.any():
        logger.warning(f"Seasonal std floored for {int(floored.sum())} unit-hours "
                       f"(zero-variance units: {list(flagged) or 'none'})")
    g = np.where(floored, floor, g)
    return SeasonalFit(f_cycle=f, g_cycle=g, flagged_units=flagged)


@dataclass(frozen=True, eq=False)
class VarFit:
    A: np.ndarray  # lag x dim x dim
    sigma: np.ndarray
    n_obs: int
    regularized: bool = False


def fit_var(u: np.ndarray, lag: int) -> VarFit:
    """Multivariate least squares of u_t on (u_{t-1}, ..., u_{t-lag}), no intercept."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    dim, N = u.shape
    if lag < 0:
        raise EstimationError(f"lag must be >= 0, got {lag}")
    if N < lag + dim:
        raise EstimationError(f"History of {N} periods is too short for lag {lag} and dimension {dim}")

    n = N - lag
    Y = u[:, lag:]
    regularized = False
    if lag == 0:
        A = np.zeros((0, dim, dim))
        resid = Y
    else:
        # Row block l-1 of X holds u_{t-l}
        X = np.vstack([u[:, lag - l:N - l] for l in range(1, lag + 1)])
        gram = X @ X.T
        if np.linalg.matrix_rank(gram) < gram.shape[0]:
            logger.warning(f"VAR regressors are rank-deficient; adding ridge {RIDGE}")
            gram = gram + RIDGE * np.eye(gram.shape[0])
            regularized = True
        coef = np.linalg.solve(gram, X @ Y.T).T  # dim x (dim * lag)
        A = np.stack([coef[:, (l - 1) * dim:l * dim] for l in range(1, lag + 1)])
        resid = Y - coef @ X

    denom = max(n - lag * dim, 1)
    sigma = resid @ resid.T / denom
    sigma = 0.5 * (sigma + sigma.T)
    return VarFit(A=A, sigma=sigma, n_obs=n, regularized=regularized)


def _eigen(sigma: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    vals, vecs = np.linalg.eigh(0.5 * (sigma + sigma.T))
    order = np.argsort(vals)[::-1]
    return np.clip(vals[order], 0.0, None), vecs[:, order]


def reduce_dimension(sigma: np.ndarray, n_v: int) -> Tuple[np.ndarray, float]:
    """Leading n_v columns of V * sqrt(Lambda) and the share of variance they capture."""
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    dim = sigma.shape[0]
    if not 1 <= n_v <= dim:
        raise EstimationError(f"n_v must lie in [1, {dim}], got {n_v}")
    vals, vecs = _eigen(sigma)
    B = vecs[:, :n_v] * np.sqrt(vals[:n_v])
    trace = vals.sum()
    captured = 1.0 if trace <= 0 else float(vals[:n_v].sum() / trace)
    return B, captured


def cholesky_factor(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular factor of Sigma, or an eigen-factor when Sigma is only semidefinite."""
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        vals, vecs = _eigen(sigma)
        return vecs * np.sqrt(vals)


@dataclass(frozen=True, eq=False)
class VarEstimate:
    seasonal: SeasonalFit
    A: np.ndarray
    sigma: np.ndarray
    b_full: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    n_v: int
    b_truncated: np.ndarray
    captured_variance: float
    unit_ids: Tuple[str, ...] = ()
    flags: List[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def lag(self) -> int:
        return self.A.shape[0]

    @classmethod
    def from_primaries(cls, seasonal: SeasonalFit, A: np.ndarray, sigma: np.ndarray,
                       n_v: Optional[int] = None, unit_ids: Sequence[str] = (),
                       flags: Sequence[str] = ()) -> "VarEstimate":
        dim = sigma.shape[0]
        n_v = dim if n_v is None else n_v
        vals, vecs = _eigen(sigma)
        b_trunc, captured = reduce_dimension(sigma, n_v)
        return cls(seasonal=seasonal, A=np.asarray(A, dtype=float).reshape(-1, dim, dim), sigma=sigma,
                   b_full=cholesky_factor(sigma), eigenvalues=vals, eigenvectors=vecs, n_v=n_v,
                   b_truncated=b_trunc, captured_variance=captured, unit_ids=tuple(unit_ids),
                   flags=list(flags))

    def build_set(self, p_max: np.ndarray, gamma: float, rho: float, norm: str = "l1_linf",
                  offset: int = 0, initial_lags: Optional[np.ndarray] = None) -> DynamicUncertaintySet:
        """Dynamic set over the horizon of `p_max` (unit x T)."""
        p_max = np.atleast_2d(np.asarray(p_max, dtype=float))
        f, g = self.seasonal.tile(p_max.shape[1], offset)
        return DynamicUncertaintySet(f=f, g=g, A=self.A, B=self.b_truncated, gamma=gamma, rho=rho,
                                     p_max=p_max, norm=norm, initial_lags=initial_lags,
                                     unit_ids=self.unit_ids)

    def build_static_set(self, p_max: np.ndarray, gamma: float, norm: str = "l1_linf",
                         offset: int = 0) -> DynamicUncertaintySet:
        p_max = np.atleast_2d(np.asarray(p_max, dtype=float))
        f, g = self.seasonal.tile(p_max.shape[1], offset)
        return DynamicUncertaintySet.static(f, g, p_max, gamma, norm, self.unit_ids)


def estimate_model(history: np.ndarray, period_cycle: int, lag: int, n_v: Optional[int] = None,
                   unit_ids: Sequence[str] = ()) -> VarEstimate:
    """Seasonal fit -> normalised residual process -> VAR fit -> dimension reduction."""
    seasonal = estimate_seasonal(history, period_cycle)
    u = seasonal.normalize(np.atleast_2d(np.asarray(history, dtype=float)))
    var = fit_var(u, lag)
    flags = []
    if var.regularized:
        flags.append("ridge-regularized VAR fit")
    if seasonal.flagged_units:
        flags.append(f"zero-variance units {list(seasonal.flagged_units)}")
    estimate = VarEstimate.from_primaries(seasonal, var.A, var.sigma, n_v, unit_ids, flags)
    logger.info(f"Estimated VAR({lag}) over {u.shape[0]} units, n_v={estimate.n_v}, "
                f"captured variance {estimate.captured_variance:.4f}")
    return estimate


# --- persistence ---


class StochasticModel(BaseModel):
    """Serialized primaries of a VarEstimate; derived factors are recomputed on load."""

    model_config = ConfigDict(extra="forbid")

    unit_ids: List[str]
    period_cycle: int = Field(ge=1)
    f_cycle: List[List[float]]
    g_cycle: List[List[float]]
    A: List[List[List[float]]]
    sigma: List[List[float]]
    n_v: int = Field(ge=1)
    captured_variance: Optional[float] = None
    flags: List[str] = []

    @classmethod
    def from_estimate(cls, estimate: VarEstimate) -> "StochasticModel":
        return cls(unit_ids=list(estimate.unit_ids), period_cycle=estimate.seasonal.period_cycle,
                   f_cycle=estimate.seasonal.f_cycle.tolist(), g_cycle=estimate.seasonal.g_cycle.tolist(),
                   A=estimate.A.tolist(), sigma=estimate.sigma.tolist(), n_v=estimate.n_v,
                   captured_variance=estimate.captured_variance, flags=list(estimate.flags))

    def to_estimate(self) -> VarEstimate:
        dim = len(self.unit_ids)
        seasonal = SeasonalFit(np.asarray(self.f_cycle, dtype=float).reshape(dim, self.period_cycle),
                               np.asarray(self.g_cycle, dtype=float).reshape(dim, self.period_cycle))
        if np.any(seasonal.g_cycle <= 0):
            raise EstimationError("g_cycle must be strictly positive")
        sigma = np.asarray(self.sigma, dtype=float).reshape(dim, dim)
        if np.linalg.eigvalsh(0.5 * (sigma + sigma.T)).min() < -1e-8 * max(1.0, np.abs(sigma).max()):
            raise EstimationError("sigma is not positive semidefinite")
        A = np.asarray(self.A, dtype=float).reshape(-1, dim, dim) if self.A else np.zeros((0, dim, dim))
        return VarEstimate.from_primaries(seasonal, A, sigma, self.n_v, self.unit_ids, self.flags)

    def save(self, filename, output_dir=None):
        return save_json(self.model_dump(), filename, output_dir)

    @classmethod
    def load(cls, path) -> "StochasticModel":
        data = load_document(path)
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise DataParseError(f"Invalid stochastic model file {path}:\n{e}") from e
