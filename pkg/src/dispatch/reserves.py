# src/dispatch/reserves.py
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np


@dataclass(frozen=True)
class ReserveRequirement:
    """System-wide down and up reserve per period (MW)."""

    down: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        down = np.asarray(self.down, dtype=float).reshape(-1)
        up = np.asarray(self.up, dtype=float).reshape(-1)
        if down.shape != up.shape:
            raise ValueError(f"down and up reserves differ in length ({down.size} vs {up.size})")
        if np.any(down < 0) or np.any(up < 0):
            raise ValueError("reserve requirements must be nonnegative")
        object.__setattr__(self, "down", down)
        object.__setattr__(self, "up", up)

    @classmethod
    def zero(cls, horizon: int) -> "ReserveRequirement":
        return cls(np.zeros(horizon), np.zeros(horizon))

    @property
    def horizon(self) -> int:
        return self.down.size


def reserve_rule(trajectories: Union[np.ndarray, Sequence[np.ndarray]], total_demand: np.ndarray,
                 gamma: float) -> ReserveRequirement:
    """
    Down = up = gamma times the sample standard deviation (over trajectories)
    of total net load, demand minus available renewable power.
    """
    paths = np.asarray([np.atleast_2d(np.asarray(p, dtype=float)) for p in trajectories])
    if paths.shape[0] < 2:
        raise ValueError(f"reserve rule needs at least 2 trajectories, got {paths.shape[0]}")
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    net_load = np.asarray(total_demand, dtype=float)[None, :] - paths.sum(axis=1)
    sigma = net_load.std(axis=0, ddof=1)
    return ReserveRequirement(gamma * sigma, gamma * sigma)
