# src/solvers/gurobi_backend.py
from typing import List, Optional

from src.solvers.base import (BackendCapability, LazyCallback, SolveResult, SolveStatus,
                              SolverBackend)
from src.solvers.program import LinearRow, MathProgram, Sense
from src.utils.exceptions import BackendError, BackendMissingError
from src.utils.logging_config import logger


def _import_gurobi():
    try:
        import gurobipy as gp
    except ImportError as e:
        raise BackendMissingError("gurobipy is not installed; install it or use BACKEND=highs") from e
    return gp


def gurobi_available() -> bool:
    try:
        gp = _import_gurobi()
        env = gp.Env(empty=True)
        env.setParam("OutputFlag", 0)
        env.start()
        env.dispose()
        return True
    except Exception:
        return False


class GurobiBackend(SolverBackend):
    """Gurobi MILP engine. Lazy rows are injected at every integer-feasible incumbent (MIPSOL)."""

    name = "gurobi"
    capability = BackendCapability(supports_lazy_constraints=True, supports_dual_values=True,
                                   supports_milp=True)

    def _solve(self, program: MathProgram, lazy_callback: Optional[LazyCallback]) -> SolveResult:
        gp = _import_gurobi()
        GRB = gp.GRB
        try:
            env = gp.Env(empty=True)
            env.setParam("OutputFlag", 0)
            env.start()
            model = gp.Model(program.name, env=env)
        except gp.GurobiError as e:
            raise BackendMissingError(f"Gurobi environment could not start: {e}") from e

        try:
            names = program.variable_names()
            variables = {}
            for v in program.variables.values():
                vtype = GRB.BINARY if v.kind.value == "binary" else GRB.CONTINUOUS
                variables[v.name] = model.addVar(lb=v.lb, ub=v.ub, vtype=vtype, name=v.name)
            constraints = []
            for row in program.rows:
                constraints.append(model.addLConstr(self._expr(gp, row, variables), _SENSE[row.sense],
                                                    row.rhs, name=row.name))
            model.setObjective(
                gp.LinExpr([c for c in program.objective.values()],
                           [variables[v] for v in program.objective]) + program.objective_constant,
                GRB.MINIMIZE,
            )

            model.Params.MIPGap = self.options.mip_gap
            model.Params.Threads = self.options.threads
            model.Params.Seed = self.options.seed
            if self.options.time_limit is not None:
                model.Params.TimeLimit = self.options.time_limit

            injected: List[LinearRow] = []
            if lazy_callback is not None:
                model.Params.LazyConstraints = 1
                model._vars = [variables[n] for n in names]

                def callback(m, where):
                    if where != GRB.Callback.MIPSOL:
                        return
                    incumbent = dict(zip(names, m.cbGetSolution(m._vars)))
                    for row in lazy_callback(incumbent):
                        expr = self._expr(gp, row, variables)
                        if row.sense is Sense.LE:
                            m.cbLazy(expr <= row.rhs)
                        elif row.sense is Sense.GE:
                            m.cbLazy(expr >= row.rhs)
                        else:
                            m.cbLazy(expr == row.rhs)
                        injected.append(row)

                model.optimize(callback)
            else:
                model.optimize()
        except gp.GurobiError as e:
            raise BackendError(f"Gurobi failed on '{program.name}': {e}") from e

        status = _status(GRB, model.Status)
        if status is None:
            raise BackendError(f"Gurobi returned status code {model.Status} for '{program.name}'")
        if model.SolCount == 0:
            if status is SolveStatus.OPTIMAL:
                raise BackendError(f"Gurobi reported optimal without a solution for '{program.name}'")
            return SolveResult(status, message=f"gurobi status {model.Status}", injected_rows=injected)

        values = {n: float(variables[n].X) for n in names}
        if program.is_mip:
            for n, v in program.variables.items():
                if v.kind.value == "binary":
                    values[n] = float(round(values[n]))
        duals = None
        mip_gap = None
        if program.is_mip:
            mip_gap = float(model.MIPGap)
        elif status is SolveStatus.OPTIMAL:
            # Gurobi's Pi is d(objective)/d(rhs) for minimisation
            duals = {row.name: float(con.Pi) for row, con in zip(program.rows, constraints)}
        logger.debug(f"[gurobi] {len(injected)} lazy rows injected into '{program.name}'")
        return SolveResult(status, objective=float(model.ObjVal), values=values, duals=duals,
                           mip_gap=mip_gap, message=f"gurobi status {model.Status}",
                           injected_rows=injected)

    @staticmethod
    def _expr(gp, row: LinearRow, variables):
        return gp.LinExpr(list(row.coeffs.values()), [variables[v] for v in row.coeffs])


_SENSE = {Sense.LE: "<", Sense.GE: ">", Sense.EQ: "="}


def _status(GRB, code: int) -> Optional[SolveStatus]:
    if code == GRB.OPTIMAL:
        return SolveStatus.OPTIMAL
    if code in (GRB.INFEASIBLE, GRB.INF_OR_UNBD):
        return SolveStatus.INFEASIBLE
    if code == GRB.UNBOUNDED:
        return SolveStatus.UNBOUNDED
    if code in (GRB.TIME_LIMIT, GRB.ITERATION_LIMIT, GRB.NODE_LIMIT, GRB.SOLUTION_LIMIT, GRB.INTERRUPTED):
        return SolveStatus.LIMIT
    return None
