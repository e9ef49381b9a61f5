#!/usr/bin/env python3
"""
Command line interface for haffsim - DSMC laboratory for cooling granular gases.

Usage:
    haffsim simulate --config run.cfg --out series.csv --seed 42 --replicas 8
    haffsim haff-check --preset viscoelastic-a012
    haffsim fit --in series.csv --column E --window 10,1000
    haffsim tails --in series.csv --a 2 --b 0.5
    haffsim kappa --p-list 1,1.5,2,3,5,10
    haffsim psi-table --config run.cfg --xmin 1e-6 --xmax 1e6 --per-decade 8
    haffsim restitution-table --kind viscoelastic --a 0.12 --rmax 10 --n 200
"""

import functools
import io
import logging
import uuid
from datetime import datetime
from pathlib import Path
from typing import Optional, Tuple

import click
import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from haffsim import __version__
from haffsim.cli.config import (
    RunConfig,
    default_log_level,
    load_config,
    parse_config,
    preset_config,
    preset_names,
    worker_limit,
)
from haffsim.core.cooling import PsiProfile, haff_constants, psi
from haffsim.core.diagnostics import (
    fit_power_law,
    haff_target,
    renormalized_moments,
    running_max_stabilized,
)
from haffsim.core.dsmc import run_replicas
from haffsim.core.ensemble import SimMode
from haffsim.core.errors import ConfigError, HaffsimError
from haffsim.core.kernels import IsotropicKernel, TabulatedKernel
from haffsim.core.povzner import kappa_table
from haffsim.core.restitution import RestitutionModel
from haffsim.core.series import MomentSeries, moment_column
from haffsim.utils.artifacts import (
    plot_series,
    read_manifest,
    write_columns,
    write_curves,
    write_manifest,
)
from haffsim.workflow.graph import build_graph
from haffsim.workflow.state import Verdict, WorkflowStatus


console = Console()
logger = logging.getLogger(__name__)

EXIT_CODES = {"config": 2, "numerical": 3, "internal": 3}


def configure_logging(verbose: bool = False, quiet: bool = False):
    """Configure logging for the CLI.

    Args:
        verbose: Enable debug logging.
        quiet: Only warnings and errors.
    """
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = default_log_level()
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        force=True,
    )


def error_line(kind: str, message: str) -> str:
    """Single machine-parseable error line."""
    flat = " ".join(str(message).split()).replace('"', "'")
    return f'haffsim: error kind={kind} message="{flat}"'


def fail(kind: str, message: str):
    """Report an error on stderr and exit with the code of its family."""
    click.echo(error_line(kind, message), err=True)
    raise click.exceptions.Exit(EXIT_CODES.get(kind, 3))


def handle_errors(func):
    """Turn library exceptions into one stderr line and an exit code."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except HaffsimError as exc:
            logger.debug("Command failed", exc_info=True)
            fail(exc.kind, str(exc))
        except ValueError as exc:
            logger.debug("Command failed", exc_info=True)
            fail("config", str(exc))
        except OSError as exc:
            logger.debug("Command failed", exc_info=True)
            fail("config", str(exc))

    return wrapper


def print_header(quiet: bool = False):
    """Print CLI header."""
    if quiet:
        return
    console.print(
        Panel.fit(
            "[bold cyan]haffsim - granular gas cooling laboratory[/bold cyan]",
            border_style="cyan",
        )
    )


def resolve_run_config(
    config_path: Optional[str],
    preset: Optional[str],
    seed: Optional[int] = None,
    replicas: Optional[int] = None,
    out: Optional[str] = None,
) -> RunConfig:
    """Load the run configuration from a file or a preset and apply overrides."""
    if bool(config_path) == bool(preset):
        raise ConfigError("exactly one of --config or --preset is required")
    run_config = load_config(config_path) if config_path else preset_config(preset)
    return run_config.with_overrides(seed=seed, replicas=replicas, output_path=out)


def parse_window(window: Optional[str]) -> Optional[Tuple[float, float]]:
    if not window:
        return None
    try:
        low, high = (float(part) for part in window.split(","))
    except ValueError as exc:
        raise ConfigError(f"--window expects 'lo,hi', got '{window}'") from exc
    return low, high


def parse_float_list(raw: str, option: str) -> list:
    try:
        return [float(item) for item in raw.split(",") if item.strip()]
    except ValueError as exc:
        raise ConfigError(f"{option} expects a comma-separated list of numbers") from exc


def emit_columns(header, rows, out: Optional[str]):
    """Write a column table to ``out`` or stdout."""
    buffer = io.StringIO()
    write_columns(buffer, header, rows)
    if out:
        Path(out).write_text(buffer.getvalue(), encoding="utf-8")
        logger.info("Wrote table to %s", out)
    else:
        click.echo(buffer.getvalue(), nl=False)


def save_series(series: MomentSeries, run_config: RunConfig, path: str, extra=None):
    series.to_csv(path)
    write_manifest(
        path,
        run_config.to_text(),
        seed=run_config.sim.seed,
        replicas=run_config.replicas,
        extra=extra,
    )


def build_series_table(series: MomentSeries) -> Table:
    """Build a rich table summarizing the first and last records."""
    table = Table(title="Run Summary", show_header=True, header_style="bold magenta")
    table.add_column("Quantity", style="cyan", width=14)
    table.add_column("Start", style="white")
    table.add_column("End", style="white")
    for name in ["t", "E", "theta"] + [moment_column(p) for p in series.moment_orders]:
        values = series.column(name)
        table.add_row(name, f"{values[0]:.6g}", f"{values[-1]:.6g}")
    ncoll = series.column("ncoll")
    table.add_row("collisions", f"{ncoll[0]:.0f}", f"{ncoll[-1]:.0f}")
    return table


def create_initial_state(
    run_config: RunConfig, preset: Optional[str], max_workers: Optional[int]
) -> dict:
    """Create initial haff-check state."""
    return {
        "workflow_id": str(uuid.uuid4()),
        "run_config": run_config,
        "preset": preset,
        "max_workers": max_workers,
        "series": None,
        "fit": None,
        "upper_bound": None,
        "verdict": None,
        "reasons": None,
        "status": WorkflowStatus.PENDING.value,
        "start_time": datetime.now().isoformat(),
        "end_time": None,
        "error": None,
        "error_kind": None,
    }


def calculate_duration(start_time: str, end_time: str) -> float:
    """Duration in seconds between two ISO 8601 timestamps."""
    start = datetime.fromisoformat(start_time)
    end = datetime.fromisoformat(end_time)
    return (end - start).total_seconds()


def print_check_results(result: dict):
    """Print haff-check results to the console."""
    fit = result["fit"]
    upper_bound = result["upper_bound"]
    run_config = result["run_config"]

    table = Table(title="Haff Law Check", show_header=True, header_style="bold magenta")
    table.add_column("Field", style="cyan", width=22)
    table.add_column("Value", style="white")
    table.add_row("Scenario", result.get("preset") or "custom configuration")
    table.add_row("Restitution", run_config.sim.restitution.describe())
    table.add_row("Exponent", f"{fit['exponent']:.4f} ± {fit['stderr']:.4f}")
    table.add_row("Target", f"{fit['target']:.4f}")
    table.add_row("Band", f"[{fit['band'][0]:.4f}, {fit['band'][1]:.4f}]")
    table.add_row("Fit window", f"[{fit['window'][0]:g}, {fit['window'][1]:g}]")
    table.add_row("Upper-bound violations", str(upper_bound["violations"]))
    console.print(table)

    if result.get("end_time"):
        duration = calculate_duration(result["start_time"], result["end_time"])
        console.print(f"Duration: [cyan]{duration:.2f}[/cyan] seconds")

    color = "green" if result["verdict"] == Verdict.PASS.value else "red"
    console.print(f"Verdict: [{color}]{result['verdict']}[/{color}]")
    for reason in result.get("reasons") or []:
        console.print(f"  - {reason}")


@click.group()
@click.version_option(version=__version__, prog_name="haffsim")
def cli():
    """haffsim - DSMC simulation and diagnostics of cooling granular gases.

    Simulates the homogeneous inelastic Boltzmann equation with velocity
    dependent restitution and checks the generalized Haff law.
    """


@cli.command()
@click.option("--config", "config_path", type=click.Path(), help="Run configuration file")
@click.option("--preset", type=str, help="Packaged scenario name")
@click.option("--seed", type=click.IntRange(min=0), help="Override the configured seed")
@click.option("--out", "-o", type=click.Path(), help="Series CSV path")
@click.option("--replicas", type=click.IntRange(min=1), help="Independent replicas to average")
@click.option("--curves", type=click.Path(file_okay=False), help="Directory for curve files")
@click.option("--plot", type=click.Path(), help="SVG chart of E(t)")
@click.option("--quiet", "-q", is_flag=True, help="Only warnings and errors")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@handle_errors
def simulate(
    config_path: Optional[str],
    preset: Optional[str],
    seed: Optional[int],
    out: Optional[str],
    replicas: Optional[int],
    curves: Optional[str],
    plot: Optional[str],
    quiet: bool,
    verbose: bool,
):
    """Run the DSMC simulation and write the moment series.

    Example:
        haffsim simulate --config run.cfg --out series.csv --seed 42 --replicas 8
    """
    configure_logging(verbose, quiet)
    print_header(quiet)
    run_config = resolve_run_config(config_path, preset, seed, replicas, out)

    if quiet:
        _, series = run_replicas(run_config.sim, run_config.replicas, worker_limit())
    else:
        with console.status("[bold green]Simulating...", spinner="dots"):
            _, series = run_replicas(run_config.sim, run_config.replicas, worker_limit())

    save_series(series, run_config, run_config.output_path)
    if curves:
        write_curves(series, curves)
    if plot:
        plot_series(series, plot)
    if not quiet:
        console.print(build_series_table(series))
        console.print(f"[green]Series saved to:[/green] {run_config.output_path}")


@cli.command("haff-check")
@click.option("--preset", type=str, help="Packaged scenario name")
@click.option("--config", "config_path", type=click.Path(), help="Run configuration file")
@click.option("--seed", type=click.IntRange(min=0), help="Override the configured seed")
@click.option("--replicas", type=click.IntRange(min=1), help="Independent replicas to average")
@click.option("--out", "-o", type=click.Path(), help="Also write the series CSV here")
@click.option("--plot", type=click.Path(), help="SVG chart of E(t) with bound and fit")
@click.option("--quiet", "-q", is_flag=True, help="Only warnings and errors")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
@handle_errors
def haff_check(
    preset: Optional[str],
    config_path: Optional[str],
    seed: Optional[int],
    replicas: Optional[int],
    out: Optional[str],
    plot: Optional[str],
    quiet: bool,
    verbose: bool,
):
    """Simulate, fit the cooling exponent, check the ODE bound and give a verdict.

    Exits with 1 when the verdict is FAIL.

    Example:
        haffsim haff-check --preset viscoelastic-a012
    """
    configure_logging(verbose, quiet)
    print_header(quiet)
    run_config = resolve_run_config(config_path, preset, seed, replicas, out)

    graph = build_graph()
    initial_state = create_initial_state(run_config, preset, worker_limit())
    if quiet:
        result = graph.invoke(initial_state)
    else:
        with console.status("[bold green]Running haff-check...", spinner="dots"):
            result = graph.invoke(initial_state)

    if result.get("status") == WorkflowStatus.FAILED.value:
        fail(result.get("error_kind") or "internal", result.get("error") or "haff-check failed")

    series = result["series"]
    if out:
        save_series(series, run_config, out, extra={"verdict": result["verdict"]})
    if plot:
        fit = result["fit"]
        fit_line = np.exp(fit["intercept"]) * (1.0 + series.t) ** fit["exponent"]
        bound = np.array(result["upper_bound"]["values"])
        envelope = result["upper_bound"].get("envelope")
        plot_series(
            series,
            plot,
            bound=bound,
            fit_line=fit_line,
            envelope=None if envelope is None else np.array(envelope),
        )

    click.echo(
        f"verdict={result['verdict']} exponent={result['fit']['exponent']:.6f} "
        f"target={result['fit']['target']:.6f}"
    )
    if not quiet:
        print_check_results(result)
    if result["verdict"] != Verdict.PASS.value:
        raise click.exceptions.Exit(1)


def _series_gamma(input_path: str, config_path: Optional[str]) -> Optional[float]:
    if config_path:
        return load_config(config_path).sim.restitution.gamma
    manifest = read_manifest(input_path)
    if manifest and manifest.get("config"):
        return parse_config(manifest["config"]).sim.restitution.gamma
    return None


def _series_mode(input_path: str) -> SimMode:
    manifest = read_manifest(input_path)
    if manifest and manifest.get("config"):
        return parse_config(manifest["config"]).sim.mode
    return SimMode.PHYSICAL


@cli.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True), help="Series CSV")
@click.option("--column", default="E", show_default=True, help="Column to fit")
@click.option("--window", type=str, help="Fit window lo,hi (default: last two decades)")
@click.option("--gamma", type=float, help="Small-impact exponent for the target")
@click.option("--config", "config_path", type=click.Path(), help="Run file giving gamma")
@click.option("--quiet", "-q", is_flag=True, help="Only warnings and errors")
@handle_errors
def fit(
    input_path: str,
    column: str,
    window: Optional[str],
    gamma: Optional[float],
    config_path: Optional[str],
    quiet: bool,
):
    """Fit a power law in 1 + t to a series column.

    Example:
        haffsim fit --in series.csv --column E --window 10,1000
    """
    configure_logging(quiet=quiet)
    series = MomentSeries.from_csv(input_path)
    try:
        values = series.column(column)
    except KeyError as exc:
        raise ConfigError(f"series has no column '{column}'") from exc
    result = fit_power_law(series.t, values, parse_window(window))

    if gamma is None:
        gamma = _series_gamma(input_path, config_path)
    target = None
    if gamma is not None:
        if column == "E":
            target = haff_target(gamma)
        elif column.startswith("m_"):
            target = float(column[2:]) * haff_target(gamma)
        elif column == "theta":
            target = 0.0
    target_text = f"{target:.6f}" if target is not None else "n/a"

    click.echo(
        f"exponent={result.exponent:.6f} stderr={result.stderr:.6f} target={target_text} "
        f"window={result.window[0]:g},{result.window[1]:g} points={result.n_points}"
    )


@cli.command()
@click.option("--in", "input_path", required=True, type=click.Path(exists=True), help="Series CSV")
@click.option("--a", "a", default=2.0, show_default=True, type=float, help="Gamma slope a")
@click.option("--b", "b_offset", default=0.5, show_default=True, type=float, help="Offset b")
@click.option("--out", "-o", type=click.Path(), help="Write the z_p table here")
@click.option("--quiet", "-q", is_flag=True, help="Only warnings and errors")
@handle_errors
def tails(input_path: str, a: float, b_offset: float, out: Optional[str], quiet: bool):
    """Renormalized moments z_p = m_p / Γ(a p + b) and the tail certificate.

    Example:
        haffsim tails --in series.csv --a 2 --b 0.5
    """
    configure_logging(quiet=quiet)
    series = MomentSeries.from_csv(input_path, mode=_series_mode(input_path))
    table, report = renormalized_moments(series, a, b_offset)

    time_name = "tau" if series.mode is SimMode.SELF_SIMILAR else "t"
    header = [time_name] + [f"z_{p:g}" for p in report.orders]
    rows = zip(table.times, *(table.values[p] for p in report.orders))
    emit_columns(header, rows, out)

    line = (
        f"b_offset={report.b_offset:g} q_certificate={report.q_certificate:.10g} "
        f"q_raw={report.q_raw:.10g} "
        f"bounded={str(report.bounded).lower()}"
    )
    if series.has_tail:
        line += f" tail_bounded={str(running_max_stabilized(series.column('tail'))).lower()}"
    click.echo(line)


@cli.command()
@click.option("--p-list", default="1,1.5,2,3,5,10", show_default=True, help="Orders p >= 1")
@click.option("--kernel", "kernel_path", type=click.Path(exists=True), help="Tabulated b(s)")
@click.option("--q", default=float("inf"), show_default=True, type=float, help="L^q exponent")
@click.option("--out", "-o", type=click.Path(), help="Write the table here")
@click.option("--quiet", is_flag=True, help="Only warnings and errors")
@handle_errors
def kappa(p_list: str, kernel_path: Optional[str], q: float, out: Optional[str], quiet: bool):
    """Povzner constants κ_p and their Hölder bound.

    Example:
        haffsim kappa --p-list 1,1.5,2,3,5,10
    """
    configure_logging(quiet=quiet)
    kernel = TabulatedKernel.from_file(kernel_path) if kernel_path else IsotropicKernel()
    rows = kappa_table(parse_float_list(p_list, "--p-list"), kernel, q)
    emit_columns(("p", "kappa_p", "holder_bound"), ((r.p, r.kappa, r.bound) for r in rows), out)


@cli.command("psi-table")
@click.option("--config", "config_path", type=click.Path(), help="Run configuration file")
@click.option("--preset", type=str, help="Packaged scenario name")
@click.option("--xmin", default=1e-6, show_default=True, type=float)
@click.option("--xmax", default=1e6, show_default=True, type=float)
@click.option("--per-decade", default=8, show_default=True, type=click.IntRange(min=1))
@click.option("--out", "-o", type=click.Path(), help="Write the table here")
@click.option("--quiet", "-q", is_flag=True, help="Only warnings and errors")
@handle_errors
def psi_table(
    config_path: Optional[str],
    preset: Optional[str],
    xmin: float,
    xmax: float,
    per_decade: int,
    out: Optional[str],
    quiet: bool,
):
    """Ψ_e(x) next to its small- and large-speed asymptotes.

    The small_x_law column is C_gamma x^((3+γ)/2) with C_gamma built from the
    deficit of e², 1 - e(r)² ≈ 2a r^γ, so it is twice the value obtained from
    the 1 - e(r) ≈ a r^γ coefficient alone.

    Example:
        haffsim psi-table --config run.cfg --xmin 1e-6 --xmax 1e6 --per-decade 8
    """
    configure_logging(quiet=quiet)
    if not 0.0 < xmin < xmax:
        raise ConfigError("--xmin and --xmax must satisfy 0 < xmin < xmax")
    run_config = resolve_run_config(config_path, preset)
    profile = PsiProfile(run_config.sim.restitution, run_config.sim.kernel)
    constants = haff_constants(profile)
    gamma = run_config.sim.restitution.gamma

    n_points = int(round(np.log10(xmax / xmin) * per_decade)) + 1
    x = np.geomspace(xmin, xmax, n_points)
    values = psi(profile, x)
    small = constants.C_gamma * x ** ((3.0 + gamma) / 2.0)
    large = constants.C_b * x**1.5
    emit_columns(("x", "psi", "small_x_law", "large_x_law"), zip(x, values, small, large), out)


@cli.command("restitution-table")
@click.option(
    "--kind",
    required=True,
    type=click.Choice(["constant", "monotone", "viscoelastic"]),
    help="Restitution law",
)
@click.option("--a", "a", type=float, help="Material constant")
@click.option("--e0", type=float, help="Constant value")
@click.option("--eta", type=float, help="Monotone exponent")
@click.option("--rmax", default=10.0, show_default=True, type=float)
@click.option("--n", "n_points", default=200, show_default=True, type=click.IntRange(min=2))
@click.option("--out", "-o", type=click.Path(), help="Write the table here")
@handle_errors
def restitution_table(
    kind: str,
    a: Optional[float],
    e0: Optional[float],
    eta: Optional[float],
    rmax: float,
    n_points: int,
    out: Optional[str],
):
    """Two columns r, e(r) on [0, rmax].

    Example:
        haffsim restitution-table --kind viscoelastic --a 0.12 --rmax 10 --n 200
    """
    configure_logging(quiet=True)
    if not rmax > 0.0:
        raise ConfigError("--rmax must be positive")
    model = RestitutionModel.from_params(kind, e0=e0, a=a, eta=eta)
    r = np.linspace(0.0, rmax, n_points)
    emit_columns(("r", "e"), zip(r, model.eval(r)), out)


@cli.command()
def presets():
    """List the packaged scenarios."""
    for name in preset_names():
        click.echo(name)


@cli.command()
def version():
    """Show version information."""
    console.print(f"[cyan]haffsim[/cyan] version [green]{__version__}[/green]")


def main():
    """Main entry point for the CLI."""
    cli()


if __name__ == "__main__":
    main()
