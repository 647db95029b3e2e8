# src/models/power_system.py
"""
Static description of the power system: generators, renewable units,
storage units, transmission lines (given as dense shift-factor rows) and
nodal demand over a horizon of T periods.

Per-period limits may be given as a scalar or as a list of length T;
scalars are broadcast to length T when a PowerSystem is loaded, so the
stored model always carries full-length lists.
"""
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.utils.exceptions import DataParseError
from src.utils.file_utils import load_document, save_json

PerPeriod = Union[float, List[float]]


class _SystemModel(BaseModel):
    # Unknown keys in a system file are a parse error
    model_config = ConfigDict(extra="forbid", frozen=True)


def _as_array(value: PerPeriod, horizon: int) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(horizon, float(arr))
    return arr


def _check_nonnegative(name: str, value: PerPeriod) -> None:
    if np.any(np.asarray(value, dtype=float) < 0):
        raise ValueError(f"{name} must be >= 0")


class Generator(_SystemModel):
    id: str
    node: str
    variable_cost: float = Field(ge=0.0)  # $/MWh
    no_load_cost: float = Field(0.0, ge=0.0)  # $/h
    startup_cost: float = Field(0.0, ge=0.0)
    shutdown_cost: float = Field(0.0, ge=0.0)
    p_min: PerPeriod = 0.0
    p_max: PerPeriod
    ramp_up: PerPeriod  # MW/h
    ramp_down: PerPeriod
    startup_ramp: PerPeriod
    shutdown_ramp: PerPeriod
    min_up: int = Field(1, ge=1)
    min_down: int = Field(1, ge=1)
    initial_on: bool = False
    initial_output: float = Field(0.0, ge=0.0)
    # None: the unit has been in its initial state long enough for min up/down not to bind
    initial_hours_in_state: Optional[int] = Field(None, ge=0)

    @model_validator(mode="after")
    def _check(self) -> "Generator":
        for name in ("p_min", "p_max", "ramp_up", "ramp_down", "startup_ramp", "shutdown_ramp"):
            _check_nonnegative(f"{self.id}.{name}", getattr(self, name))
        p_min = np.asarray(self.p_min, dtype=float)
        p_max = np.asarray(self.p_max, dtype=float)
        if p_min.shape == p_max.shape or p_min.ndim == 0 or p_max.ndim == 0:
            if np.any(p_min > p_max):
                raise ValueError(f"{self.id}: p_min exceeds p_max")
        if not self.initial_on and self.initial_output != 0.0:
            raise ValueError(f"{self.id}: initial_output must be 0 when the unit starts off")
        if self.initial_on and self.initial_output > float(np.max(p_max)):
            raise ValueError(f"{self.id}: initial_output above p_max")
        return self


class RenewableUnit(_SystemModel):
    id: str
    node: str
    kind: Literal["wind", "solar"]
    p_max_profile: PerPeriod

    @model_validator(mode="after")
    def _check(self) -> "RenewableUnit":
        _check_nonnegative(f"{self.id}.p_max_profile", self.p_max_profile)
        return self


class StorageUnit(_SystemModel):
    id: str
    node: str
    discharge_min: PerPeriod = 0.0
    discharge_max: PerPeriod
    charge_min: PerPeriod = 0.0
    charge_max: PerPeriod
    capacity: float = Field(ge=0.0)  # MWh
    initial_level: float = Field(0.0, ge=0.0)
    efficiency: float = Field(1.0, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self) -> "StorageUnit":
        for name in ("discharge_min", "discharge_max", "charge_min", "charge_max"):
            _check_nonnegative(f"{self.id}.{name}", getattr(self, name))
        for lo, hi in (("discharge_min", "discharge_max"), ("charge_min", "charge_max")):
            a, b = np.asarray(getattr(self, lo), dtype=float), np.asarray(getattr(self, hi), dtype=float)
            if (a.shape == b.shape or a.ndim == 0 or b.ndim == 0) and np.any(a > b):
                raise ValueError(f"{self.id}: {lo} exceeds {hi}")
        if self.initial_level > self.capacity:
            raise ValueError(f"{self.id}: initial_level above capacity")
        return self


class TransmissionLine(_SystemModel):
    id: str
    flow_limit: float = Field(gt=0.0)
    # Dense rows, ordered like the demand nodes / generators / renewables / storages
    alpha_demand: List[float] = []
    alpha_generator: List[float] = []
    alpha_renewable: List[float] = []
    alpha_storage: List[float] = []


_PER_PERIOD_FIELDS = {
    "generators": ("p_min", "p_max", "ramp_up", "ramp_down", "startup_ramp", "shutdown_ramp"),
    "renewables": ("p_max_profile",),
    "storages": ("discharge_min", "discharge_max", "charge_min", "charge_max"),
}


class PowerSystem(_SystemModel):
    name: str = "system"
    period_length: float = Field(1.0, gt=0.0)  # h
    generators: List[Generator]
    renewables: List[RenewableUnit] = []
    storages: List[StorageUnit] = []
    lines: List[TransmissionLine] = []
    demand: Dict[str, List[float]]  # node -> MW per period

    @model_validator(mode="before")
    @classmethod
    def _broadcast(cls, data: Any) -> Any:
        if not isinstance(data, dict) or not data.get("demand"):
            return data
        horizon = len(next(iter(data["demand"].values())))
        data = dict(data)
        for key, fields in _PER_PERIOD_FIELDS.items():
            units = []
            for unit in data.get(key, []) or []:
                unit = unit.model_dump() if isinstance(unit, BaseModel) else dict(unit)
                for f in fields:
                    if f in unit and np.ndim(unit[f]) == 0:
                        unit[f] = [float(unit[f])] * horizon
                units.append(unit)
            data[key] = units
        return data

    @model_validator(mode="after")
    def _check(self) -> "PowerSystem":
        horizon = self.horizon
        if horizon < 1:
            raise ValueError("horizon must be at least one period")
        for node, series in self.demand.items():
            if len(series) != horizon:
                raise ValueError(f"demand at node '{node}' has {len(series)} periods, expected {horizon}")
            if min(series) < 0:
                raise ValueError(f"negative demand at node '{node}'")
        for key, fields in _PER_PERIOD_FIELDS.items():
            for unit in getattr(self, key):
                for f in fields:
                    if len(getattr(unit, f)) != horizon:
                        raise ValueError(f"{unit.id}.{f} has {len(getattr(unit, f))} periods, expected {horizon}")
        for gen in self.generators:
            if np.any(np.asarray(gen.p_min) > np.asarray(gen.p_max)):
                raise ValueError(f"{gen.id}: p_min exceeds p_max")
        ids = [u.id for u in (*self.generators, *self.renewables, *self.storages)]
        if len(ids) != len(set(ids)):
            raise ValueError("unit ids must be unique across generators, renewables and storages")
        sizes = {"alpha_demand": len(self.demand), "alpha_generator": len(self.generators),
                 "alpha_renewable": len(self.renewables), "alpha_storage": len(self.storages)}
        for line in self.lines:
            for f, n in sizes.items():
                if len(getattr(line, f)) != n:
                    raise ValueError(f"line {line.id}: {f} has {len(getattr(line, f))} entries, expected {n}")
        return self

    # --- sizes ---

    @property
    def horizon(self) -> int:
        return len(next(iter(self.demand.values())))

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    @property
    def n_renewables(self) -> int:
        return len(self.renewables)

    @property
    def n_storages(self) -> int:
        return len(self.storages)

    @property
    def n_lines(self) -> int:
        return len(self.lines)

    @property
    def demand_nodes(self) -> List[str]:
        return list(self.demand)

    # --- dense arrays (generator/renewable/storage x period) ---

    def _stack(self, units, field: str) -> np.ndarray:
        if not units:
            return np.zeros((0, self.horizon))
        return np.vstack([_as_array(getattr(u, field), self.horizon) for u in units])

    @cached_property
    def variable_cost(self) -> np.ndarray:
        return np.array([g.variable_cost for g in self.generators], dtype=float)

    @cached_property
    def no_load_cost(self) -> np.ndarray:
        return np.array([g.no_load_cost for g in self.generators], dtype=float)

    @cached_property
    def startup_cost(self) -> np.ndarray:
        return np.array([g.startup_cost for g in self.generators], dtype=float)

    @cached_property
    def shutdown_cost(self) -> np.ndarray:
        return np.array([g.shutdown_cost for g in self.generators], dtype=float)

    @cached_property
    def p_min(self) -> np.ndarray:
        return self._stack(self.generators, "p_min")

    @cached_property
    def p_max(self) -> np.ndarray:
        return self._stack(self.generators, "p_max")

    @cached_property
    def ramp_up(self) -> np.ndarray:
        return self._stack(self.generators, "ramp_up")

    @cached_property
    def ramp_down(self) -> np.ndarray:
        return self._stack(self.generators, "ramp_down")

    @cached_property
    def startup_ramp(self) -> np.ndarray:
        return self._stack(self.generators, "startup_ramp")

    @cached_property
    def shutdown_ramp(self) -> np.ndarray:
        return self._stack(self.generators, "shutdown_ramp")

    @cached_property
    def initial_on(self) -> np.ndarray:
        return np.array([1.0 if g.initial_on else 0.0 for g in self.generators])

    @cached_property
    def initial_output(self) -> np.ndarray:
        return np.array([g.initial_output for g in self.generators], dtype=float)

    @cached_property
    def renewable_p_max(self) -> np.ndarray:
        return self._stack(self.renewables, "p_max_profile")

    @cached_property
    def discharge_min(self) -> np.ndarray:
        return self._stack(self.storages, "discharge_min")

    @cached_property
    def discharge_max(self) -> np.ndarray:
        return self._stack(self.storages, "discharge_max")

    @cached_property
    def charge_min(self) -> np.ndarray:
        return self._stack(self.storages, "charge_min")

    @cached_property
    def charge_max(self) -> np.ndarray:
        return self._stack(self.storages, "charge_max")

    @cached_property
    def storage_capacity(self) -> np.ndarray:
        return np.array([s.capacity for s in self.storages], dtype=float)

    @cached_property
    def storage_initial(self) -> np.ndarray:
        return np.array([s.initial_level for s in self.storages], dtype=float)

    @cached_property
    def efficiency(self) -> np.ndarray:
        return np.array([s.efficiency for s in self.storages], dtype=float)

    @cached_property
    def demand_matrix(self) -> np.ndarray:
        return np.array([self.demand[n] for n in self.demand], dtype=float)

    @cached_property
    def total_demand(self) -> np.ndarray:
        return self.demand_matrix.sum(axis=0)

    @cached_property
    def flow_limit(self) -> np.ndarray:
        return np.array([line.flow_limit for line in self.lines], dtype=float)

    def _alpha(self, field: str, width: int) -> np.ndarray:
        if not self.lines:
            return np.zeros((0, width))
        return np.array([getattr(line, field) for line in self.lines], dtype=float).reshape(len(self.lines), width)

    @cached_property
    def alpha_demand(self) -> np.ndarray:
        return self._alpha("alpha_demand", len(self.demand))

    @cached_property
    def alpha_generator(self) -> np.ndarray:
        return self._alpha("alpha_generator", self.n_generators)

    @cached_property
    def alpha_renewable(self) -> np.ndarray:
        return self._alpha("alpha_renewable", self.n_renewables)

    @cached_property
    def alpha_storage(self) -> np.ndarray:
        return self._alpha("alpha_storage", self.n_storages)

    @cached_property
    def demand_flow(self) -> np.ndarray:
        """Line flow caused by demand alone (lines x periods)."""
        return self.alpha_demand @ self.demand_matrix

    # --- io ---

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "PowerSystem":
        data = load_document(path)
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise DataParseError(f"Invalid power system file {path}:\n{e}") from e

    def to_file(self, filename: Union[str, Path], output_dir: Optional[Union[str, Path]] = None) -> Path:
        return save_json(self.model_dump(), filename, output_dir)

    def with_demand(self, demand: Dict[str, List[float]]) -> "PowerSystem":
        data = self.model_dump()
        data["demand"] = demand
        return PowerSystem.model_validate(data)


@dataclass(frozen=True)
class CommitmentSchedule:
    """On/off, start-up and shut-down binaries (generator x period)."""

    x_on: np.ndarray
    x_start: np.ndarray
    x_shut: np.ndarray

    @classmethod
    def from_on_off(cls, system: PowerSystem, x_on) -> "CommitmentSchedule":
        x_on = np.asarray(x_on, dtype=float).reshape(system.n_generators, system.horizon)
        prev = np.column_stack([system.initial_on, x_on[:, :-1]]) if system.n_generators else x_on
        diff = x_on - prev
        return cls(x_on=x_on, x_start=np.maximum(diff, 0.0), x_shut=np.maximum(-diff, 0.0))

    @classmethod
    def all_on(cls, system: PowerSystem) -> "CommitmentSchedule":
        return cls.from_on_off(system, np.ones((system.n_generators, system.horizon)))

    def commitment_cost(self, system: PowerSystem) -> float:
        h = system.period_length
        return float(np.sum(system.no_load_cost[:, None] * self.x_on) * h
                     + np.sum(system.startup_cost[:, None] * self.x_start)
                     + np.sum(system.shutdown_cost[:, None] * self.x_shut))

    def to_dict(self) -> Dict[str, List[List[int]]]:
        return {
            "x_on": self.x_on.astype(int).tolist(),
            "x_start": self.x_start.astype(int).tolist(),
            "x_shut": self.x_shut.astype(int).tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CommitmentSchedule":
        return cls(*(np.asarray(data[k], dtype=float) for k in ("x_on", "x_start", "x_shut")))
