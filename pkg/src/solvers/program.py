# src/solvers/program.py
"""
Backend-neutral linear / mixed-binary programs.

Constraint builders across the package emit `LinearRow`s: a sparse map of
variable name -> coefficient, a sense and a right-hand side. A `MathProgram`
declares the variables, collects rows and a linear objective (always
minimised), and lowers everything to a sparse standard form that backends
consume.
"""
import copy
import math
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Tuple

import numpy as np
from scipy import sparse

INF = math.inf


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Sense(str, Enum):
    LE = "<="
    EQ = "="
    GE = ">="


def var_name(base: str, *index) -> str:
    """Canonical variable name, e.g. var_name("x_on", 2, 5) -> "x_on(2,5)"."""
    if not index:
        return base
    return f"{base}({','.join(str(i) for i in index)})"


@dataclass(frozen=True)
class Variable:
    name: str
    lb: float = 0.0
    ub: float = INF
    kind: VarKind = VarKind.CONTINUOUS


@dataclass(frozen=True)
class LinearRow:
    """sum(coeffs[v] * v) <sense> rhs"""

    name: str
    coeffs: Mapping[str, float]
    sense: Sense
    rhs: float
    kind: str = "generic"

    def activity(self, values: Mapping[str, float]) -> float:
        return float(sum(c * values[v] for v, c in self.coeffs.items()))

    def violation(self, values: Mapping[str, float]) -> float:
        """Amount by which `values` violate the row (0 when satisfied)."""
        lhs = self.activity(values)
        if self.sense is Sense.LE:
            return max(0.0, lhs - self.rhs)
        if self.sense is Sense.GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)

    def triples(self) -> List[Tuple[float, str, float]]:
        """(coefficient, variable, bound) triples; bound is the row rhs."""
        return [(float(c), v, float(self.rhs)) for v, c in self.coeffs.items()]


class ConstraintBlock(list):
    """A list of LinearRows with a few conveniences."""

    def variables(self) -> List[str]:
        seen: Dict[str, None] = {}
        for row in self:
            for v in row.coeffs:
                seen.setdefault(v, None)
        return list(seen)

    def of_kind(self, *kinds: str) -> "ConstraintBlock":
        return ConstraintBlock(r for r in self if r.kind in kinds)

    def max_violation(self, values: Mapping[str, float]) -> float:
        return max((r.violation(values) for r in self), default=0.0)

    def is_satisfied(self, values: Mapping[str, float], tol: float = 1e-7) -> bool:
        return self.max_violation(values) <= tol


class LinearExpr:
    """Accumulates `sum(coef * var) + constant` before it is turned into a row."""

    __slots__ = ("coeffs", "constant")

    def __init__(self, coeffs: Optional[Mapping[str, float]] = None, constant: float = 0.0):
        self.coeffs: Dict[str, float] = defaultdict(float)
        if coeffs:
            for v, c in coeffs.items():
                self.coeffs[v] += c
        self.constant = float(constant)

    def add(self, var: str, coef: float) -> "LinearExpr":
        if coef != 0.0:
            self.coeffs[var] += float(coef)
        return self

    def add_constant(self, value: float) -> "LinearExpr":
        self.constant += float(value)
        return self

    def add_expr(self, other: "LinearExpr", scale: float = 1.0) -> "LinearExpr":
        for v, c in other.coeffs.items():
            self.add(v, scale * c)
        self.constant += scale * other.constant
        return self

    def scaled(self, factor: float) -> "LinearExpr":
        return LinearExpr({v: factor * c for v, c in self.coeffs.items()}, factor * self.constant)

    def evaluate(self, values: Mapping[str, float]) -> float:
        return self.constant + sum(c * values[v] for v, c in self.coeffs.items())

    def row(self, name: str, sense: Sense, rhs: float = 0.0, kind: str = "generic") -> LinearRow:
        """Row `expr <sense> rhs`, with the expression constant moved to the right-hand side."""
        coeffs = {v: c for v, c in self.coeffs.items() if c != 0.0}
        return LinearRow(name, coeffs, sense, float(rhs) - self.constant, kind)


@dataclass
class StandardForm:
    """row_lo <= A x <= row_hi, lb <= x <= ub, minimise c x + c0."""

    c: np.ndarray
    c0: float
    A: sparse.csr_matrix
    row_lo: np.ndarray
    row_hi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integrality: np.ndarray
    senses: List[Sense] = field(default_factory=list)
    rhs: np.ndarray = field(default_factory=lambda: np.zeros(0))


class MathProgram:
    """Variables, linear rows and a minimisation objective."""

    def __init__(self, name: str = "program"):
        self.name = name
        self.variables: Dict[str, Variable] = {}
        self._index: Dict[str, int] = {}
        self.rows: List[LinearRow] = []
        self._row_names: Dict[str, int] = {}
        self.objective: Dict[str, float] = {}
        self.objective_constant = 0.0
        self._matrix_cache: Optional[Tuple[int, int, StandardForm]] = None

    # --- declaration -----------------------------------------------------

    def add_variable(self, name: str, lb: float = 0.0, ub: float = INF,
                     kind: VarKind = VarKind.CONTINUOUS) -> str:
        if name in self._index:
            raise ValueError(f"Variable '{name}' declared twice in program '{self.name}'")
        if kind is VarKind.BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        if lb > ub:
            raise ValueError(f"Variable '{name}' has empty bounds [{lb}, {ub}]")
        self._index[name] = len(self._index)
        self.variables[name] = Variable(name, float(lb), float(ub), kind)
        return name

    def add_free_variable(self, name: str) -> str:
        return self.add_variable(name, -INF, INF)

    def has_variable(self, name: str) -> bool:
        return name in self._index

    def index(self, name: str) -> int:
        return self._index[name]

    @property
    def n_variables(self) -> int:
        return len(self._index)

    @property
    def is_mip(self) -> bool:
        return any(v.kind is VarKind.BINARY for v in self.variables.values())

    def add_row(self, row: LinearRow) -> LinearRow:
        unknown = [v for v in row.coeffs if v not in self._index]
        if unknown:
            raise ValueError(f"Row '{row.name}' references undeclared variables: {unknown[:5]}")
        if row.name in self._row_names:
            raise ValueError(f"Row '{row.name}' added twice to program '{self.name}'")
        self._row_names[row.name] = len(self.rows)
        self.rows.append(row)
        return row

    def add_rows(self, rows: Iterable[LinearRow]) -> None:
        for row in rows:
            self.add_row(row)

    def has_row(self, name: str) -> bool:
        return name in self._row_names

    def row(self, name: str) -> LinearRow:
        return self.rows[self._row_names[name]]

    def set_objective(self, coeffs: Mapping[str, float], constant: float = 0.0) -> None:
        unknown = [v for v in coeffs if v not in self._index]
        if unknown:
            raise ValueError(f"Objective references undeclared variables: {unknown[:5]}")
        self.objective = {v: float(c) for v, c in coeffs.items() if c != 0.0}
        self.objective_constant = float(constant)

    def with_objective(self, coeffs: Mapping[str, float], constant: float = 0.0) -> "MathProgram":
        """Shallow copy sharing variables, rows and the cached matrix; only the objective differs."""
        clone = copy.copy(self)
        clone.set_objective(coeffs, constant)
        return clone

    def copy(self) -> "MathProgram":
        clone = MathProgram(self.name)
        for v in self.variables.values():
            clone.add_variable(v.name, v.lb, v.ub, v.kind)
        clone.add_rows(self.rows)
        clone.set_objective(self.objective, self.objective_constant)
        return clone

    def iter_rows(self) -> Iterator[LinearRow]:
        return iter(self.rows)

    # --- lowering --------------------------------------------------------

    def standard_form(self) -> StandardForm:
        n, m = self.n_variables, len(self.rows)
        cached = self._matrix_cache
        if cached is None or cached[0] != n or cached[1] != m:
            data, indices, indptr = [], [], [0]
            row_lo = np.empty(m)
            row_hi = np.empty(m)
            rhs = np.empty(m)
            senses = []
            for k, row in enumerate(self.rows):
                for v, c in row.coeffs.items():
                    indices.append(self._index[v])
                    data.append(c)
                indptr.append(len(indices))
                rhs[k] = row.rhs
                senses.append(row.sense)
                row_lo[k] = row.rhs if row.sense in (Sense.GE, Sense.EQ) else -INF
                row_hi[k] = row.rhs if row.sense in (Sense.LE, Sense.EQ) else INF
            A = sparse.csr_matrix((np.asarray(data, dtype=float), np.asarray(indices, dtype=np.int64),
                                   np.asarray(indptr, dtype=np.int64)), shape=(m, n))
            variables = list(self.variables.values())
            form = StandardForm(
                c=np.zeros(n), c0=0.0, A=A, row_lo=row_lo, row_hi=row_hi,
                lb=np.array([v.lb for v in variables], dtype=float),
                ub=np.array([v.ub for v in variables], dtype=float),
                integrality=np.array([1 if v.kind is VarKind.BINARY else 0 for v in variables], dtype=np.int64),
                senses=senses, rhs=rhs,
            )
            self._matrix_cache = (n, m, form)
        form = copy.copy(self._matrix_cache[2])
        c = np.zeros(n)
        for v, coef in self.objective.items():
            c[self._index[v]] = coef
        form.c = c
        form.c0 = self.objective_constant
        return form

    def variable_names(self) -> List[str]:
        return list(self.variables)

    def evaluate_objective(self, values: Mapping[str, float]) -> float:
        return self.objective_constant + sum(c * values[v] for v, c in self.objective.items())

    def __repr__(self) -> str:
        return (f"MathProgram(name={self.name!r}, variables={self.n_variables}, rows={len(self.rows)}, "
                f"mip={self.is_mip})")
