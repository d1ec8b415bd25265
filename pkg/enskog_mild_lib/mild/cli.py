"""Command-line interface for the relativistic Enskog mild-solution toolkit."""

import json
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from .. import __version__
from ..report import flatten_report, load_json_report
from .errors import EnskogError, NoConvergence, SmallnessViolated
from .pipeline import ScenarioConfig, ScenarioRunner, load_scenario

EXIT_VALIDATION = 1
EXIT_SMALLNESS = 2
EXIT_NO_CONVERGENCE = 3


def _config_option(fn):
    return click.option(
        "--config", "-c",
        "config_path",
        type=click.Path(exists=True, dir_okay=False, path_type=Path),
        required=True,
        help="Scenario file (TOML with dotted keys)",
    )(fn)


def _scenario_options(fn):
    fn = click.option("--verbose", "-v", is_flag=True, help="Print per-iteration progress")(fn)
    fn = click.option("--threads", type=int, default=None, help="Worker threads, 0 = auto (overrides config)")(fn)
    fn = click.option("--seed", type=int, default=None, help="Random seed (overrides config)")(fn)
    fn = click.option(
        "--output", "-o",
        "output_dir",
        type=click.Path(file_okay=False, path_type=Path),
        default=None,
        help="Output directory (overrides config output_dir)",
    )(fn)
    return _config_option(fn)


def _load(
    ctx: click.Context, config_path: Path, output_dir: Optional[Path], seed: Optional[int], threads: Optional[int]
) -> ScenarioConfig:
    """Validate the scenario; exit 1 naming the offending key."""
    try:
        return load_scenario(config_path, {"output_dir": output_dir, "seed": seed, "threads": threads})
    except ValidationError as e:
        for err in e.errors():
            key = ".".join(str(part) for part in err["loc"])
            click.echo(f"Invalid config {config_path}: {key}: {err['msg']}", err=True)
        ctx.exit(EXIT_VALIDATION)
    except ValueError as e:
        click.echo(f"Invalid config {config_path}: {e}", err=True)
        ctx.exit(EXIT_VALIDATION)


def _run(ctx: click.Context, runner: ScenarioRunner, action):
    """Run one scenario action, mapping failures to exit codes."""
    try:
        result = action()
    except SmallnessViolated as e:
        click.echo(f"Smallness violated: {e}", err=True)
        ctx.exit(EXIT_SMALLNESS)
    except NoConvergence as e:
        runner.print_summary()
        click.echo(f"No convergence: {e}", err=True)
        ctx.exit(EXIT_NO_CONVERGENCE)
    except EnskogError as e:
        click.echo(f"Error: {e}", err=True)
        ctx.exit(EXIT_VALIDATION)
    runner.print_summary()
    return result


@click.group()
@click.version_option(version=__version__)
def cli():
    """Enskog Mild - relativistic Enskog operator and mild solutions.

    Builds the global mild solution of the relativistic Enskog equation for
    near-vacuum data by Picard iteration, and measures the constants the
    construction depends on.
    """
    pass


@cli.command()
@_scenario_options
@click.pass_context
def solve(
    ctx, config_path: Path, output_dir: Optional[Path], seed: Optional[int], threads: Optional[int], verbose: bool
):
    """Run Picard iteration for the scenario's initial datum.

    Writes diagnostics.csv, trajectory.bin + header.json and summary.json.

    Example:
        enskog-mild solve -c configs/small.toml -o out/
    """
    config = _load(ctx, config_path, output_dir, seed, threads)
    runner = ScenarioRunner(config, verbose=verbose)
    summary = _run(ctx, runner, runner.solve)
    click.echo(f"\nConverged in {summary.iterations} iteration(s), residual {summary.final_residual:.3e}")
    click.echo(f"Positivity minimum: {summary.positivity_min:.3e} ({'ok' if summary.positivity_ok else 'VIOLATED'})")
    click.echo(f"Outputs written to: {config.output_dir}")


@cli.command("check-hypotheses")
@_scenario_options
@click.pass_context
def check_hypotheses(
    ctx, config_path: Path, output_dir: Optional[Path], seed: Optional[int], threads: Optional[int], verbose: bool
):
    """Estimate K, L(R) and the smallness threshold; compare with the Galeano conditions.

    Example:
        enskog-mild check-hypotheses -c configs/small.toml
    """
    config = _load(ctx, config_path, output_dir, seed, threads)
    runner = ScenarioRunner(config, verbose=verbose)
    result = _run(ctx, runner, runner.check_hypotheses)
    click.echo(f"\nK = {result.hypotheses.K:.6e} ({result.hypotheses.label})")
    click.echo(f"Smallness threshold: {result.threshold:.6e}")
    click.echo(f"Galeano infimum over v: {result.galeano.infimum} (strict set empty: {result.galeano.strict_empty})")
    click.echo(f"Report written to: {config.output_dir / 'report.json'}")


@cli.command("kinematics-selftest")
@click.option("--samples", "-n", type=int, default=1_000_000, help="Random collisions (default: 1000000)")
@click.option("--seed", type=int, default=0, help="Random seed (default: 0)")
def kinematics_selftest_cmd(samples: int, seed: int):
    """Check conservation and invariant identities on random collisions.

    Example:
        enskog-mild kinematics-selftest --samples 100000
    """
    from .errors import IssueCollector
    from .kinematics import kinematics_selftest

    collector = IssueCollector()
    deviations = kinematics_selftest(n=samples, seed=seed, collector=collector)
    click.echo(f"\nKinematics self-test ({samples} collisions, seed {seed}):")
    click.echo("-" * 50)
    for key, value in deviations.items():
        click.echo(f"  {key:26} {value:.3e}")
    worst = max(deviations["momentum_conservation"], deviations["energy_conservation"])
    click.echo(f"\nMax conservation deviation: {worst:.3e}")
    for issue in collector.issues:
        click.echo(f"Note: {issue.message} (largest excursion {issue.value:.3e})")


@cli.command("boltzmann-limit")
@_scenario_options
@click.pass_context
def boltzmann_limit(
    ctx, config_path: Path, output_dir: Optional[Path], seed: Optional[int], threads: Optional[int], verbose: bool
):
    """Compare enskog solutions with the boltzmann solution as a -> 0.

    Example:
        enskog-mild boltzmann-limit -c configs/limit.toml
    """
    config = _load(ctx, config_path, output_dir, seed, threads)
    runner = ScenarioRunner(config, verbose=verbose)
    table = _run(ctx, runner, runner.boltzmann_limit)
    click.echo("\n  a          difference")
    for row in table.itertuples():
        click.echo(f"  {row.a:<10} {row.difference_norm:.6e}")
    click.echo(f"Table written to: {config.output_dir / 'boltzmann_limit.csv'}")


@cli.command("show-report")
@click.option(
    "--report", "-r",
    "report_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    required=True,
    help="summary.json, report.json or header.json",
)
@click.option(
    "--format", "-f",
    "output_format",
    type=click.Choice(["table", "json"]),
    default="table",
    help="Output format (default: table)",
)
def show_report(report_path: Path, output_format: str):
    """Pretty-print a JSON report.

    Example:
        enskog-mild show-report -r out/summary.json
    """
    data = load_json_report(report_path)
    if output_format == "json":
        click.echo(json.dumps(data, indent=2, sort_keys=True))
        return
    click.echo(f"\n{report_path.name}")
    click.echo("-" * 50)
    for key, value in flatten_report(data).items():
        click.echo(f"  {key:40} {value}")


def main():
    cli()


if __name__ == "__main__":
    main()
