# src/robust/screening.py
from enum import Enum

import numpy as np


class ScreenOutcome(str, Enum):
    CERTIFIED = "certified"
    NEEDS_LP = "needs_lp"


def interval_upper_bound(weights: np.ndarray, unit_min: np.ndarray, unit_max: np.ndarray) -> float:
    """Upper bound of sum(weights * p) over the per-unit boxes, by sign inspection."""
    weights = np.asarray(weights, dtype=float)
    return float(np.sum(np.where(weights > 0, weights * unit_max, weights * unit_min)))


def screen_constraint(weights: np.ndarray, bound: float, unit_min: np.ndarray,
                      unit_max: np.ndarray) -> ScreenOutcome:
    """CERTIFIED when the box bound already satisfies the row, else the separation LP is needed."""
    if interval_upper_bound(weights, unit_min, unit_max) <= bound:
        return ScreenOutcome.CERTIFIED
    return ScreenOutcome.NEEDS_LP
