# src/workflows/pipeline.py
"""
End-to-end runs behind the CLI subcommands: estimate, solve-uc,
solve-det-uc, simulate and compare. Every run writes its artifacts plus a
manifest under the output directory.
"""
import hashlib
import json
import time
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import pandas as pd
from pydantic import BaseModel

from src.config.settings import Settings
from src.dispatch.det_uc import solve_deterministic_uc
from src.dispatch.engines import EdEngine
from src.dispatch.reserves import ReserveRequirement, reserve_rule
from src.models.power_system import PowerSystem
from src.robust.engine import RobustUcOptions, UcSolution, exact_worst_case_cost, solve_robust_uc
from src.solvers.factory import backend_from_settings
from src.uncertainty.dynamic_set import DynamicUncertaintySet
from src.uncertainty.estimation import StochasticModel, estimate_model
from src.uncertainty.timeseries import load_timeseries
from src.utils.exceptions import ConfigError, RobustUcError
from src.utils.file_utils import markdown_table, save_json, save_markdown, save_table
from src.utils.logging_config import logger
from src.workflows.metrics import SimulationReport, summary_table
from src.workflows.simulation_workflow import SimulationConfig, SimulationWorkflow, draw_trajectories

PathLike = Union[str, Path]
VERSIONED_PACKAGES = ("numpy", "scipy", "pandas", "pydantic", "pydantic-settings", "PyYAML", "typer", "rich")

# Timing-table variants: (label, one_tree, outer_approx, screening)
TECHNIQUES = (
    ("CG", False, False, False),
    ("CG+OTB", True, False, False),
    ("CG+OTB+OA", True, True, False),
    ("CG+OTB+OA+CS", True, True, True),
)


# --- manifest ---

class RunManifest(BaseModel):
    command: str
    config_hash: str
    seed: int
    versions: Dict[str, str]
    created_at: str
    inputs: Dict[str, str] = {}
    outputs: List[str] = []


def config_hash(settings: Settings) -> str:
    canonical = json.dumps(settings.model_dump(), sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def package_versions() -> Dict[str, str]:
    versions = {}
    for name in VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "not installed"
    return versions


def write_manifest(command: str, settings: Settings, inputs: Dict[str, PathLike],
                   outputs: Sequence[PathLike]) -> Path:
    manifest = RunManifest(command=command, config_hash=config_hash(settings), seed=settings.SEED,
                           versions=package_versions(), created_at=datetime.now(timezone.utc).isoformat(),
                           inputs={k: str(v) for k, v in inputs.items() if v is not None},
                           outputs=[str(p) for p in outputs])
    return save_json(manifest.model_dump(), f"manifest_{command}", settings.OUTPUT_DIR)


# --- building blocks ---

def load_model(path: PathLike) -> StochasticModel:
    return StochasticModel.load(path)


def build_uncertainty_set(system: PowerSystem, model: StochasticModel, settings: Settings,
                          gamma: Optional[float] = None, static: bool = False) -> DynamicUncertaintySet:
    """Set over the system horizon, with unit order taken from the system's renewables."""
    ids = [r.id for r in system.renewables]
    if list(model.unit_ids) != ids:
        raise ConfigError(f"Stochastic model units {model.unit_ids} do not match system renewables {ids}")
    estimate = model.to_estimate()
    gamma = settings.GAMMA if gamma is None else gamma
    if static:
        return estimate.build_static_set(system.renewable_p_max, gamma, settings.NORM)
    return estimate.build_set(system.renewable_p_max, gamma, settings.RHO, settings.NORM)


def default_engine(label: str) -> EdEngine:
    if label == "deterministic":
        return EdEngine.DETERMINISTIC
    if label == "robust_static":
        return EdEngine.POLICY_ENFORCEMENT
    return EdEngine.POLICY_GUIDED


def reserves_for(system: PowerSystem, model: StochasticModel, uset: DynamicUncertaintySet,
                 settings: Settings, gamma: float) -> ReserveRequirement:
    if gamma == 0 or system.n_renewables == 0:
        return ReserveRequirement.zero(system.horizon)
    paths = draw_trajectories(model.to_estimate(), uset, max(settings.N_TRAJECTORIES, 2), settings.SEED)
    return reserve_rule(paths, system.total_demand, gamma)


# --- subcommands ---

class EstimateOutput(BaseModel):
    model_path: str
    n_units: int
    n_v: int
    captured_variance: float
    flags: List[str] = []
    errors: List[str] = []


def run_estimate(timeseries: PathLike, settings: Settings, name: str = "stochastic_model") -> EstimateOutput:
    units, history, _ = load_timeseries(timeseries)
    estimate = estimate_model(history, settings.PERIOD_CYCLE, settings.LAG, settings.N_V, units)
    model = StochasticModel.from_estimate(estimate)
    path = model.save(name, settings.OUTPUT_DIR)
    out = EstimateOutput(model_path=str(path), n_units=len(units), n_v=estimate.n_v,
                         captured_variance=estimate.captured_variance, flags=list(estimate.flags))
    write_manifest("estimate", settings, {"timeseries": timeseries}, [path])
    return out


def run_solve_uc(system_path: PathLike, model_path: PathLike, settings: Settings, static: bool = False,
                 name: Optional[str] = None) -> UcSolution:
    system = PowerSystem.from_file(system_path)
    model = load_model(model_path)
    uset = build_uncertainty_set(system, model, settings, static=static)
    solution = solve_robust_uc(system, uset, RobustUcOptions.from_settings(settings), backend_from_settings(settings))
    solution.label = "robust_static" if static else "robust_dynamic"
    path = solution.save(name or f"uc_{solution.label}", settings.OUTPUT_DIR)
    write_manifest("solve-uc", settings, {"system": system_path, "model": model_path}, [path])
    return solution


def run_solve_det_uc(system_path: PathLike, model_path: PathLike, settings: Settings,
                     reserve_gamma: Optional[float] = None, name: str = "uc_deterministic") -> UcSolution:
    system = PowerSystem.from_file(system_path)
    model = load_model(model_path)
    uset = build_uncertainty_set(system, model, settings)
    gamma = settings.GAMMA if reserve_gamma is None else reserve_gamma
    reserves = reserves_for(system, model, uset, settings, gamma)
    solution = solve_deterministic_uc(system, uset.forecast_path().available, reserves,
                                      backend_from_settings(settings))
    path = solution.save(name, settings.OUTPUT_DIR)
    write_manifest("solve-det-uc", settings, {"system": system_path, "model": model_path}, [path])
    return solution


def run_simulate(system_path: PathLike, model_path: PathLike, solution_path: PathLike, settings: Settings,
                 engine: Optional[EdEngine] = None, name: Optional[str] = None) -> SimulationReport:
    system = PowerSystem.from_file(system_path)
    model = load_model(model_path)
    solution = UcSolution.load(system, solution_path)
    uset = build_uncertainty_set(system, model, settings, static=solution.label == "robust_static")
    engine = engine or default_engine(solution.label)
    config = SimulationConfig.from_settings(settings, engine=engine)
    dynamic = build_uncertainty_set(system, model, settings)
    trajectories = draw_trajectories(model.to_estimate(), dynamic, config.n_trajectories, config.seed)
    report, log = SimulationWorkflow(system, solution, uset, config, backend_from_settings(settings)).run(
        trajectories, solution.label)
    name = name or f"simulation_{solution.label}"
    outputs = [save_json(report.model_dump(), name, settings.OUTPUT_DIR),
               save_table(log, f"{name}_log", settings.OUTPUT_DIR),
               save_markdown(markdown_table(summary_table([report])), f"{name}_summary", settings.OUTPUT_DIR)]
    write_manifest("simulate", settings, {"system": system_path, "model": model_path, "solution": solution_path},
                   outputs)
    return report


class CompareOutput(BaseModel):
    summary: List[Dict[str, object]] = []
    oa_difference: List[Dict[str, object]] = []
    timing: List[Dict[str, object]] = []
    errors: List[str] = []


def run_compare(system_path: PathLike, model_path: PathLike, settings: Settings, gammas: Sequence[float],
                timing: bool = False) -> CompareOutput:
    """
    RobUC-Dynamic, RobUC-Static and DetUC over a grid of gamma on shared
    trajectories, plus the OA/exact worst-case cost table and, with
    `timing`, solve times of the technique combinations.
    """
    system = PowerSystem.from_file(system_path)
    model = load_model(model_path)
    backend = backend_from_settings(settings)
    output = CompareOutput()
    config = SimulationConfig.from_settings(settings)
    dynamic_base = build_uncertainty_set(system, model, settings)
    trajectories = draw_trajectories(model.to_estimate(), dynamic_base, config.n_trajectories, config.seed)
    reports: List[SimulationReport] = []
    penalty_by_gamma: List[float] = []

    for gamma in gammas:
        logger.info(f"--- Compare cell gamma={gamma} ---")
        dynamic = build_uncertainty_set(system, model, settings, gamma=gamma)
        static = build_uncertainty_set(system, model, settings, gamma=gamma, static=True)
        cells = (
            ("robust_dynamic", dynamic, lambda: solve_robust_uc(
                system, dynamic, RobustUcOptions.from_settings(settings), backend)),
            ("robust_static", static, lambda: solve_robust_uc(
                system, static, RobustUcOptions.from_settings(settings), backend)),
            ("deterministic", dynamic, lambda: solve_deterministic_uc(
                system, dynamic.forecast_path().available,
                reserves_for(system, model, dynamic, settings, gamma), backend)),
        )
        for label, uset, solve in cells:
            try:
                solution = solve()
                solution.label = label
                cfg = config.model_copy(update={"engine": default_engine(label)})
                report, _ = SimulationWorkflow(system, solution, uset, cfg, backend).run(
                    trajectories, f"{label} (gamma={gamma:g})")
                reports.append(report)
                if label == "robust_dynamic":
                    penalty_by_gamma.append(report.penalty_freq)
            except RobustUcError as e:
                logger.error(f"Compare cell {label} gamma={gamma} failed: {e}", exc_info=True)
                output.errors.append(f"{label} gamma={gamma}: {e}")

        try:
            output.oa_difference.append(_oa_difference(system, dynamic, settings, backend, gamma))
        except RobustUcError as e:
            output.errors.append(f"OA comparison gamma={gamma}: {e}")

    if any(b > a + 1e-12 for a, b in zip(penalty_by_gamma, penalty_by_gamma[1:])):
        logger.warning(f"RobUC-Dynamic penalty frequency is not nonincreasing in gamma: {penalty_by_gamma}")

    if timing:
        output.timing = _timing_table(system, dynamic_base, settings, backend)

    output.summary = summary_table(reports).to_dict(orient="records") if reports else []
    _write_compare(output, settings, {"system": system_path, "model": model_path})
    return output


def _oa_difference(system: PowerSystem, uset: DynamicUncertaintySet, settings: Settings, backend,
                   gamma: float) -> Dict[str, object]:
    with_oa = solve_robust_uc(system, uset, RobustUcOptions.from_settings(settings, outer_approx=True), backend)
    without = solve_robust_uc(system, uset, RobustUcOptions.from_settings(settings, outer_approx=False), backend)
    diff = (with_oa.total_cost - without.total_cost) / max(abs(without.total_cost), 1e-9)
    if with_oa.total_cost < without.total_cost * (1 - 2 * settings.MIP_GAP):
        logger.warning(f"gamma={gamma}: OA objective {with_oa.total_cost:.2f} below exact {without.total_cost:.2f}")
    return {
        "Gamma": gamma,
        "Objective with OA": with_oa.total_cost,
        "Objective without OA": without.total_cost,
        "Difference": f"{100 * diff:.2f}%",
        "Exact worst case of OA policy": exact_worst_case_cost(system, uset, with_oa.policy, backend.spawn()),
    }


def _timing_table(system: PowerSystem, uset: DynamicUncertaintySet, settings: Settings,
                  backend) -> List[Dict[str, object]]:
    rows = []
    for label, one_tree, oa, screening in TECHNIQUES:
        options = RobustUcOptions.from_settings(settings, one_tree=one_tree, outer_approx=oa, screening=screening)
        start = time.perf_counter()
        try:
            solution = solve_robust_uc(system, uset, options, backend)
            rows.append({"Technique": label, "Time (s)": time.perf_counter() - start,
                         "Iterations": solution.stats.iterations, "LPs": solution.stats.lps_solved,
                         "Screened": solution.stats.lps_screened, "Objective": solution.total_cost})
        except RobustUcError as e:
            rows.append({"Technique": label, "Time (s)": time.perf_counter() - start, "Error": str(e)})
    return rows


def _write_compare(output: CompareOutput, settings: Settings, inputs: Dict[str, PathLike]) -> None:
    sections = ["# Simulation summary\n", markdown_table(pd.DataFrame(output.summary)) if output.summary else "none\n"]
    if output.oa_difference:
        sections += ["\n# Worst-case cost with and without OA\n", markdown_table(pd.DataFrame(output.oa_difference))]
    if output.timing:
        sections += ["\n# Technique timing\n", markdown_table(pd.DataFrame(output.timing).fillna(""))]
    paths = [save_json(output.model_dump(), "compare", settings.OUTPUT_DIR),
             save_markdown("".join(sections), "compare", settings.OUTPUT_DIR)]
    write_manifest("compare", settings, inputs, paths)
