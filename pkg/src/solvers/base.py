# src/solvers/base.py
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.solvers.program import LinearRow, MathProgram
from src.utils.exceptions import BackendError, BackendMissingError
from src.utils.logging_config import logger

# Called with the incumbent's variable values; returns rows violated by it
LazyCallback = Callable[[Mapping[str, float]], Sequence[LinearRow]]


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"  # optimal within the configured gap
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


@dataclass(frozen=True)
class BackendCapability:
    supports_lazy_constraints: bool
    supports_dual_values: bool
    supports_milp: bool = True


class BackendOptions(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mip_gap: float = Field(0.01, gt=0.0, lt=1.0)
    time_limit: Optional[float] = Field(None, gt=0.0)
    threads: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)

    @classmethod
    def from_settings(cls, settings) -> "BackendOptions":
        return cls(mip_gap=settings.MIP_GAP, time_limit=settings.TIME_LIMIT, threads=settings.THREADS)


@dataclass
class SolveResult:
    status: SolveStatus
    objective: Optional[float] = None
    values: Dict[str, float] = field(default_factory=dict)
    duals: Optional[Dict[str, float]] = None
    mip_gap: Optional[float] = None
    message: str = ""
    injected_rows: List[LinearRow] = field(default_factory=list)
    solve_time: float = 0.0

    @property
    def has_solution(self) -> bool:
        return bool(self.values)

    def value(self, name: str) -> float:
        return self.values[name]

    def array(self, names: Sequence[str]) -> np.ndarray:
        return np.array([self.values[n] for n in names], dtype=float)


class SolverBackend(ABC):
    """
    One LP/MILP engine. A backend instance runs one solve at a time; use
    `spawn()` to get an independent instance for concurrent work.
    """

    name: str = "abstract"
    capability: BackendCapability = BackendCapability(False, False, False)

    def __init__(self, options: Optional[BackendOptions] = None):
        self.options = options or BackendOptions()
        self._lock = threading.Lock()

    def spawn(self) -> "SolverBackend":
        return type(self)(self.options)

    def solve(self, program: MathProgram, lazy_callback: Optional[LazyCallback] = None) -> SolveResult:
        if lazy_callback is not None and not self.capability.supports_lazy_constraints:
            raise BackendError(f"Backend '{self.name}' does not support lazy constraints")
        if program.is_mip and not self.capability.supports_milp:
            raise BackendMissingError(
                f"Program '{program.name}' has binary variables but backend '{self.name}' only solves LPs")
        with self._lock:
            start = time.perf_counter()
            result = self._solve(program, lazy_callback)
            result.solve_time = time.perf_counter() - start
        logger.debug(f"[{self.name}] {program.name}: {result.status.value} "
                     f"obj={result.objective} in {result.solve_time:.3f}s")
        return result

    def solve_lp_dual(self, program: MathProgram) -> Dict[str, float]:
        """Dual value per row name, as d(objective)/d(rhs)."""
        if program.is_mip:
            raise BackendError(f"Dual values requested for MILP '{program.name}'")
        if not self.capability.supports_dual_values:
            raise BackendError(f"Backend '{self.name}' does not report dual values")
        result = self.solve(program)
        if result.status is not SolveStatus.OPTIMAL or result.duals is None:
            raise BackendError(f"No dual solution for '{program.name}': {result.status.value} {result.message}")
        return result.duals

    @abstractmethod
    def _solve(self, program: MathProgram, lazy_callback: Optional[LazyCallback]) -> SolveResult:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}(gap={self.options.mip_gap}, time_limit={self.options.time_limit})"
