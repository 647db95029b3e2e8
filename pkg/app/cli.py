# app/cli.py
import os
import sys
from pathlib import Path
from typing import List, Optional

import typer
from rich.console import Console
from rich.table import Table

# Add the project root to the Python path to allow importing from src
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from src.config.settings import settings as base_settings  # noqa: E402
from src.dispatch.engines import EdEngine  # noqa: E402
from src.utils.exceptions import ConfigError, RobustUcError  # noqa: E402
from src.utils.file_utils import load_document  # noqa: E402
from src.utils.logging_config import logger, set_verbosity  # noqa: E402
from src.workflows import pipeline  # noqa: E402

app = typer.Typer(help="Multistage robust unit commitment: estimate, solve, simulate, compare.",
                  no_args_is_help=True)
console = Console()


def _settings(ctx: typer.Context):
    return ctx.obj["settings"]


def _fail(error: RobustUcError) -> None:
    console.print(f"[bold red]❌ {type(error).__name__}:[/bold red] {error}")
    stage = getattr(error, "stage", None)
    if stage:
        console.print(f"   stage: {stage}")
    logger.error(f"{type(error).__name__}: {error}", exc_info=True)
    raise typer.Exit(code=error.exit_code)


def _print_rows(title: str, rows: List[dict]) -> None:
    if not rows:
        return
    table = Table(title=title)
    columns = list(dict.fromkeys(k for row in rows for k in row))
    for column in columns:
        table.add_column(str(column))
    for row in rows:
        table.add_row(*[f"{row[c]:.4g}" if isinstance(row.get(c), float) else str(row.get(c, "")) for c in columns])
    console.print(table)


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(None, "--config", "-c", help="YAML/JSON file of settings overrides."),
    backend: Optional[str] = typer.Option(None, help="auto, highs or gurobi."),
    gamma: Optional[float] = typer.Option(None, help="Per-period uncertainty budget."),
    rho: Optional[float] = typer.Option(None, help="Total budget fraction, in (0, 1]."),
    n_v: Optional[int] = typer.Option(None, "--n-v", help="Number of innovation components kept."),
    lag: Optional[int] = typer.Option(None, help="VAR lag order."),
    mip_gap: Optional[float] = typer.Option(None, help="Relative MIP gap."),
    time_limit: Optional[float] = typer.Option(None, help="Solver time limit (s)."),
    threads: Optional[int] = typer.Option(None, help="Worker cap for LPs and trajectories."),
    seed: Optional[int] = typer.Option(None, help="Run seed."),
    trajectories: Optional[int] = typer.Option(None, "--trajectories", "-n", help="Simulated trajectories."),
    screening: Optional[bool] = typer.Option(None, "--screening/--no-screening"),
    outer_approx: Optional[bool] = typer.Option(None, "--oa/--no-oa"),
    one_tree: Optional[bool] = typer.Option(None, "--one-tree/--no-one-tree"),
    output_dir: Optional[Path] = typer.Option(None, help="Directory for artifacts."),
    lp_dump_dir: Optional[Path] = typer.Option(None, help="Write an infeasible master here as LP text."),
    verbose: bool = typer.Option(False, "--verbose", "-v"),
):
    """Global options: a config file is applied first, flags override it."""
    set_verbosity(verbose)
    try:
        overrides = {}
        if config is not None:
            document = load_document(config) or {}
            if not isinstance(document, dict):
                raise ConfigError(f"{config}: expected a mapping of settings")
            overrides.update({str(k).upper(): v for k, v in document.items()})
        flags = dict(BACKEND=backend, GAMMA=gamma, RHO=rho, N_V=n_v, LAG=lag, MIP_GAP=mip_gap,
                     TIME_LIMIT=time_limit, THREADS=threads, SEED=seed, N_TRAJECTORIES=trajectories,
                     SCREENING=screening, OUTER_APPROX=outer_approx, ONE_TREE=one_tree,
                     OUTPUT_DIR=str(output_dir) if output_dir else None,
                     LP_DUMP_DIR=str(lp_dump_dir) if lp_dump_dir else None)
        overrides.update({k: v for k, v in flags.items() if v is not None})
        try:
            run_settings = base_settings.with_overrides(**overrides)
        except ValueError as e:  # pydantic ValidationError
            raise ConfigError(f"Invalid settings: {e}") from e
    except RobustUcError as e:
        _fail(e)
    os.makedirs(run_settings.OUTPUT_DIR, exist_ok=True)
    ctx.obj = {"settings": run_settings}


@app.command()
def estimate(ctx: typer.Context,
             timeseries: Path = typer.Argument(..., help="CSV with timestamp, unit_id, available_mw."),
             name: str = typer.Option("stochastic_model", help="Output file name.")):
    """Fit the seasonal VAR model and write the stochastic model file."""
    try:
        out = pipeline.run_estimate(timeseries, _settings(ctx), name)
    except RobustUcError as e:
        _fail(e)
    console.print(f"✅ Model written to {out.model_path}")
    console.print(f"   units={out.n_units}  n_v={out.n_v}  captured variance={out.captured_variance:.4f}")
    for flag in out.flags:
        console.print(f"   [yellow]⚠ {flag}[/yellow]")


@app.command("solve-uc")
def solve_uc(ctx: typer.Context,
             system: Path = typer.Argument(..., help="Power system file (YAML/JSON)."),
             model: Path = typer.Argument(..., help="Stochastic model file."),
             static: bool = typer.Option(False, "--static", help="Use the static set (no lags, B=I, rho=1)."),
             name: Optional[str] = typer.Option(None)):
    """Solve the multistage robust UC."""
    try:
        solution = pipeline.run_solve_uc(system, model, _settings(ctx), static, name)
    except RobustUcError as e:
        _fail(e)
    stats = solution.stats
    console.print(f"✅ {solution.label}: total {solution.total_cost:.2f} = commitment {solution.commitment_cost:.2f} "
                  f"+ worst-case dispatch {solution.worst_case_cost:.2f}")
    console.print(f"   iterations={stats.iterations} LPs={stats.lps_solved} screened={stats.lps_screened} "
                  f"certified={stats.certified} time={stats.wall_time:.2f}s")
    if not stats.certified:
        raise typer.Exit(code=5)


@app.command("solve-det-uc")
def solve_det_uc(ctx: typer.Context,
                 system: Path = typer.Argument(...),
                 model: Path = typer.Argument(..., help="Stochastic model (forecast and reserve rule)."),
                 reserve_gamma: Optional[float] = typer.Option(None, help="Reserve multiplier (default: gamma)."),
                 name: str = typer.Option("uc_deterministic")):
    """Solve the deterministic UC with reserves on the forecast."""
    try:
        solution = pipeline.run_solve_det_uc(system, model, _settings(ctx), reserve_gamma, name)
    except RobustUcError as e:
        _fail(e)
    console.print(f"✅ deterministic: total {solution.total_cost:.2f}")


@app.command()
def simulate(ctx: typer.Context,
             system: Path = typer.Argument(...),
             model: Path = typer.Argument(...),
             solution: Path = typer.Argument(..., help="UC solution file."),
             engine: Optional[EdEngine] = typer.Option(None, help="ED engine (default follows the solution)."),
             name: Optional[str] = typer.Option(None)):
    """Rolling-horizon dispatch simulation of a UC solution."""
    try:
        report = pipeline.run_simulate(system, model, solution, _settings(ctx), engine, name)
    except RobustUcError as e:
        _fail(e)
    _print_rows("Simulation", [report.summary_row()])
    if report.partial:
        console.print(f"[yellow]⚠ partial report: {len(report.failed_trajectories)} trajectories failed[/yellow]")


@app.command()
def compare(ctx: typer.Context,
            system: Path = typer.Argument(...),
            model: Path = typer.Argument(...),
            gammas: List[float] = typer.Option([0.5, 1.0, 2.0], "--gamma-grid", "-g", help="Repeat per value."),
            timing: bool = typer.Option(False, "--timing", help="Also time the technique combinations.")):
    """RobUC-Dynamic vs RobUC-Static vs DetUC over a gamma grid."""
    try:
        output = pipeline.run_compare(system, model, _settings(ctx), gammas, timing)
    except RobustUcError as e:
        _fail(e)
    _print_rows("Simulation summary", output.summary)
    _print_rows("Worst-case cost with and without OA", output.oa_difference)
    _print_rows("Technique timing", output.timing)
    for error in output.errors:
        console.print(f"[red]• {error}[/red]")


if __name__ == "__main__":
    app()
