# src/solvers/highs_backend.py
from typing import Optional

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from src.solvers.base import (BackendCapability, LazyCallback, SolveResult, SolveStatus,
                              SolverBackend)
from src.solvers.program import MathProgram, Sense
from src.utils.exceptions import BackendError

# scipy status codes shared by linprog(method="highs") and milp
_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
}


class HighsBackend(SolverBackend):
    """HiGHS through scipy.optimize. Always available; no lazy constraints."""

    name = "highs"
    capability = BackendCapability(supports_lazy_constraints=False, supports_dual_values=True,
                                   supports_milp=True)

    def _solve(self, program: MathProgram, lazy_callback: Optional[LazyCallback]) -> SolveResult:
        if program.n_variables == 0:
            return SolveResult(SolveStatus.OPTIMAL, objective=program.objective_constant)
        if program.is_mip:
            return self._solve_milp(program)
        return self._solve_lp(program)

    def _solve_lp(self, program: MathProgram) -> SolveResult:
        form = program.standard_form()
        le = [k for k, s in enumerate(form.senses) if s is not Sense.EQ]
        eq = [k for k, s in enumerate(form.senses) if s is Sense.EQ]
        # >= rows are negated into <= form
        sign = np.array([1.0 if form.senses[k] is Sense.LE else -1.0 for k in le])

        A_ub = b_ub = A_eq = b_eq = None
        if le:
            A_ub = form.A[le].multiply(sign[:, None]).tocsr()
            b_ub = form.rhs[le] * sign
        if eq:
            A_eq = form.A[eq]
            b_eq = form.rhs[eq]

        options = {"presolve": True}
        if self.options.time_limit is not None:
            options["time_limit"] = self.options.time_limit
        res = linprog(form.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=np.column_stack([form.lb, form.ub]), method="highs", options=options)

        status = _STATUS.get(res.status)
        if status is None:
            raise BackendError(f"HiGHS failed on '{program.name}': {res.message}")
        if status is not SolveStatus.OPTIMAL:
            return SolveResult(status, message=res.message)

        names = program.variable_names()
        duals = {}
        row_names = [row.name for row in program.rows]
        if le:
            for k, marginal, s in zip(le, res.ineqlin.marginals, sign):
                duals[row_names[k]] = float(marginal * s)
        if eq:
            for k, marginal in zip(eq, res.eqlin.marginals):
                duals[row_names[k]] = float(marginal)
        return SolveResult(
            SolveStatus.OPTIMAL,
            objective=float(res.fun) + form.c0,
            values=dict(zip(names, map(float, res.x))),
            duals=duals,
            mip_gap=0.0,
            message=res.message,
        )

    def _solve_milp(self, program: MathProgram) -> SolveResult:
        form = program.standard_form()
        options = {"disp": False, "mip_rel_gap": self.options.mip_gap}
        if self.options.time_limit is not None:
            options["time_limit"] = self.options.time_limit
        constraints = LinearConstraint(form.A, form.row_lo, form.row_hi) if form.A.shape[0] else None
        res = milp(form.c, constraints=constraints, integrality=form.integrality,
                   bounds=Bounds(form.lb, form.ub), options=options)

        status = _STATUS.get(res.status)
        if status is None:
            raise BackendError(f"HiGHS MILP failed on '{program.name}': {res.message}")
        if res.x is None:
            if status is SolveStatus.OPTIMAL:
                raise BackendError(f"HiGHS reported optimal without a solution for '{program.name}'")
            return SolveResult(status, message=res.message)

        x = np.asarray(res.x, dtype=float)
        # Round binaries so downstream code sees exact 0/1
        binary = form.integrality.astype(bool)
        x[binary] = np.round(x[binary])
        return SolveResult(
            status,
            objective=float(form.c @ x) + form.c0,
            values=dict(zip(program.variable_names(), map(float, x))),
            mip_gap=getattr(res, "mip_gap", None),
            message=res.message,
        )
