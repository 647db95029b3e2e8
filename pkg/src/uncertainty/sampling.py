# src/uncertainty/sampling.py
from typing import List, Optional

import numpy as np

from src.solvers.base import SolverBackend
from src.uncertainty.dynamic_set import DynamicUncertaintySet, ScenarioPath, latent_from_available
from src.uncertainty.estimation import VarEstimate


def simulate_paths(estimate: VarEstimate, p_max: np.ndarray, n_paths: int,
                   seed: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                   offset: int = 0, initial_lags: Optional[np.ndarray] = None) -> List[ScenarioPath]:
    """
    Draws availability trajectories from the fitted model: innovations are
    B_full @ z with z standard normal, the VAR recursion runs forward from
    the initial lags (zeros by default), and p = f + g * u is clipped to
    [0, p_max]. The horizon is the number of columns of `p_max`.
    """
    p_max = np.atleast_2d(np.asarray(p_max, dtype=float))
    R, T = p_max.shape
    rng = rng if rng is not None else np.random.default_rng(seed)
    f, g = estimate.seasonal.tile(T, offset)
    L = estimate.lag
    lags = np.zeros((L, R)) if initial_lags is None else np.asarray(initial_lags, dtype=float).reshape(L, R)

    paths = []
    for _ in range(n_paths):
        z = rng.standard_normal((estimate.b_full.shape[1], T))
        u = np.zeros((R, T))
        for t in range(T):
            u[:, t] = estimate.b_full @ z[:, t]
            for l in range(1, L + 1):
                prior = u[:, t - l] if t - l >= 0 else lags[l - t - 1]
                u[:, t] += estimate.A[l - 1] @ prior
        available = np.clip(f + g * u, 0.0, p_max)
        paths.append(ScenarioPath(available=available, u=u))
    return paths


def conditional_forecast(uset: DynamicUncertaintySet, realized: np.ndarray) -> np.ndarray:
    """
    Conditional mean of availability for the periods after the realized ones:
    latent values are recovered from the realized history, the recursion runs
    forward with zero innovations and the result is clipped to the bounds.
    Returns unit x (T - number of realized periods).
    """
    realized = np.asarray(realized, dtype=float).reshape(uset.n_units, -1)
    n = realized.shape[1]
    T = uset.horizon
    u = np.zeros((uset.n_units, T))
    u[:, :n] = latent_from_available(uset, np.clip(realized, 0.0, uset.p_max[:, :n]))
    for t in range(n, T):
        for l in range(1, uset.lag + 1):
            prior = uset.lag_value(t, l)
            u[:, t] += uset.A[l - 1] @ (prior if prior is not None else u[:, t - l])
    return np.clip(uset.f[:, n:] + uset.g[:, n:] * u[:, n:], 0.0, uset.p_max[:, n:])


def sample_members(uset: DynamicUncertaintySet, n_samples: int, rng: np.random.Generator,
                   backend: Optional[SolverBackend] = None, n_vertices: int = 12) -> List[np.ndarray]:
    """
    Random members of the set: convex combinations of LP vertices found by
    maximising random linear objectives. Every sample lies in the set.
    """
    vertices = []
    for _ in range(n_vertices):
        weights = rng.standard_normal((uset.n_units, uset.horizon))
        _, path = uset.maximize_linear(weights, backend)
        vertices.append(path.available)
    stacked = np.stack(vertices)
    samples = []
    for _ in range(n_samples):
        lam = rng.dirichlet(np.ones(len(vertices)))
        samples.append(np.tensordot(lam, stacked, axes=1))
    return samples
