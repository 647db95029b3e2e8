# tests/factories.py
"""Small systems and sets built in code, for tests that need exact control of the data."""
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.models.power_system import PowerSystem
from src.uncertainty.dynamic_set import DynamicUncertaintySet


def generator(id: str = "G1", node: str = "b1", **overrides) -> Dict:
    data = dict(id=id, node=node, variable_cost=20.0, no_load_cost=0.0, startup_cost=0.0, shutdown_cost=0.0,
                p_min=0.0, p_max=500.0, ramp_up=1000.0, ramp_down=1000.0, startup_ramp=1000.0,
                shutdown_ramp=1000.0, min_up=1, min_down=1, initial_on=True, initial_output=50.0)
    data.update(overrides)
    return data


def renewable(id: str = "W1", node: str = "b1", p_max: float = 100.0, kind: str = "wind") -> Dict:
    return dict(id=id, node=node, kind=kind, p_max_profile=p_max)


def storage(id: str = "S1", node: str = "b1", **overrides) -> Dict:
    data = dict(id=id, node=node, discharge_max=20.0, charge_max=20.0, capacity=40.0, initial_level=10.0,
                efficiency=0.9)
    data.update(overrides)
    return data


def system(demand: Sequence[float], generators: Optional[List[Dict]] = None,
           renewables: Optional[List[Dict]] = None, storages: Optional[List[Dict]] = None,
           lines: Optional[List[Dict]] = None, node: str = "b1", name: str = "toy") -> PowerSystem:
    return PowerSystem.model_validate(dict(
        name=name,
        generators=generators if generators is not None else [generator()],
        renewables=renewables if renewables is not None else [],
        storages=storages or [],
        lines=lines or [],
        demand={node: [float(d) for d in demand]},
    ))


def box_set(f, g, p_max, gamma: float = 1.0, norm: str = "linf") -> DynamicUncertaintySet:
    """Static set (no lags, B = I, rho = 1) from unit x period arrays."""
    f = np.atleast_2d(np.asarray(f, dtype=float))
    g = np.broadcast_to(np.asarray(g, dtype=float), f.shape)
    p_max = np.broadcast_to(np.asarray(p_max, dtype=float), f.shape)
    return DynamicUncertaintySet.static(f, g, p_max, gamma, norm)


def lagged_set(n_units: int = 2, horizon: int = 2, a: float = 0.5, gamma: float = 1.0, rho: float = 1.0,
               norm: str = "l1_linf", f: float = 20.0, g: float = 2.0, p_max: float = 100.0,
               initial_lags=None) -> DynamicUncertaintySet:
    """L = 1 set with A = a * I and B = I; the default bounds never bind."""
    R, T = n_units, horizon
    return DynamicUncertaintySet(f=np.full((R, T), f), g=np.full((R, T), g), A=a * np.eye(R)[None],
                                 B=np.eye(R), gamma=gamma, rho=rho, p_max=np.full((R, T), p_max), norm=norm,
                                 initial_lags=initial_lags)
