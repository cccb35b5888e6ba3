#!/usr/bin/env python3
"""
Semantic robustness CLI.

Generate synthetic populations, run attack campaigns and sweeps, rank
attributes by adversarial energy, and certify identities with randomized
smoothing.
"""

import functools
import sys
from pathlib import Path

import click
from rich.console import Console
from rich.table import Table

from semrobust import api
from semrobust.config import ConfigManager
from semrobust.core.certify import certified_accuracy_curve
from semrobust.core.certify import envelope
from semrobust.core.certify import radii_grid
from semrobust.core.ranking import format_ranking
from semrobust.exceptions import ConfigurationError
from semrobust.exceptions import NumericalError
from semrobust.exceptions import OutputError
from semrobust.exceptions import SemRobustError
from semrobust.exceptions import ValidationError
from semrobust.utils import io
from semrobust.utils.logging import get_logger
from semrobust.utils.logging import set_log_level

logger = get_logger(__name__)

# Constants
CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

console = Console()


def _exit_code(error):
    if isinstance(error, OutputError):
        return EXIT_IO
    if isinstance(error, NumericalError):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def handle_errors(command):
    """Report package errors on stderr and exit with the documented code."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (ConfigurationError, ValidationError, OutputError, NumericalError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(_exit_code(e))
        except SemRobustError as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_CONFIG)

    return wrapper


def common_options(command):
    """--config, --seed, --out, --workers and --log-level."""
    options = [
        click.option(
            "--config",
            "config_file",
            type=click.Path(),
            help="Experiment configuration file (flat JSON or YAML).",
        ),
        click.option("--seed", type=int, help="Attack/certification seed."),
        click.option("--out", "out_dir", type=click.Path(), help="Output directory."),
        click.option("--workers", type=int, help="Identities processed concurrently."),
        click.option(
            "--log-level",
            type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]),
            help="Console logging level.",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def load_config(config_file, **overrides):
    manager = ConfigManager(config_file, overrides=overrides)
    set_log_level(manager.log_level)
    return manager.to_experiment_config()


def print_summary(title, summary):
    table = Table(title=title, show_header=False, box=None, padding=(0, 2))
    for key, value in summary.items():
        if isinstance(value, float):
            value = f"{value:.4f}"
        table.add_row(str(key), str(value))
    console.print(table)


def _parse_values(text):
    if text is None:
        return None
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"Invalid sweep values {text!r}: {e}", "sweep_values", text)


@click.group(context_settings=CONTEXT_SETTINGS)
@click.version_option(package_name="semrobust")
def cli():
    """Assess semantic robustness of classifiers over latent spaces."""


@cli.command()
@click.option("--num-identities", type=int, default=2000, show_default=True)
@click.option("--latent-dim", type=int, default=64, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option(
    "--out", "output_path", type=click.Path(), default="population.json", show_default=True
)
@click.option("--log-level", default="INFO", help="Console logging level.")
@handle_errors
def gen(num_identities, latent_dim, seed, output_path, log_level):
    """Generate a synthetic population of latent codes."""
    set_log_level(log_level)
    path = api.generate_population(num_identities, latent_dim, seed, output_path)
    click.echo(f"Wrote {num_identities} codes to {path}")


@cli.command()
@common_options
@click.option("--method", type=click.Choice(["pgd", "fab"]), help="Attack paradigm.")
@click.option("--population", "population_file", type=click.Path(exists=True))
@click.option("--num-attacked", type=int, help="Number of identities to attack.")
@click.option("--budget-scale", type=float, help="Scale the budget ellipsoid by this factor.")
@click.option(
    "--only-attribute",
    help="Restrict the search to one attribute (name or index), or 'all' for a table.",
)
@click.option("--progress/--no-progress", default=False, help="Show a progress bar.")
@handle_errors
def attack(
    config_file,
    seed,
    out_dir,
    workers,
    log_level,
    method,
    population_file,
    num_attacked,
    budget_scale,
    only_attribute,
    progress,
):
    """Run an attack campaign and write per-identity results and a summary."""
    cfg = load_config(
        config_file,
        seed=seed,
        out_dir=out_dir,
        workers=workers,
        log_level=log_level,
        method=method,
        population_file=population_file,
        num_attacked=num_attacked,
        budget_scale=budget_scale,
    )
    out = Path(cfg.out_dir)

    if only_attribute == "all":
        table = api.run_attribute_table(cfg)
        path = io.write_frame(table, out / f"attribute_table_{cfg.method}.csv")
        console.print(table.to_string(index=False))
        click.echo(f"Wrote {path}")
        return

    outcomes, num_attributes, summary = api.run_attack(cfg, only_attribute, progress)
    io.write_outcomes(outcomes, num_attributes, out / "attack_results.csv")
    io.write_json(summary, out / "attack_summary.json")
    print_summary(f"{cfg.method.upper()} campaign", summary)


@cli.command()
@common_options
@click.option(
    "--axis",
    type=click.Choice(["dataset-size", "num-attacked", "budget"]),
    help="Quantity to sweep.",
)
@click.option("--values", help="Comma-separated sweep values.")
@click.option("--method", type=click.Choice(["pgd", "fab"]), help="Attack paradigm.")
@click.option("--num-attacked", type=int, help="Number of identities to attack.")
@handle_errors
def sweep(config_file, seed, out_dir, workers, log_level, axis, values, method, num_attacked):
    """Robust accuracy along one experiment axis."""
    cfg = load_config(
        config_file,
        seed=seed,
        out_dir=out_dir,
        workers=workers,
        log_level=log_level,
        sweep_axis=axis,
        sweep_values=_parse_values(values),
        method=method,
        num_attacked=num_attacked,
    )
    frame = api.run_sweep(cfg)
    path = io.write_frame(frame, Path(cfg.out_dir) / f"sweep_{cfg.sweep_axis}_{cfg.method}.csv")
    console.print(frame.to_string(index=False))
    click.echo(f"Wrote {path}")


@cli.command()
@click.argument("results", type=click.Path(exists=True))
@common_options
@click.option("--alpha", "alpha_rank", type=float, help="Significance level (default 0.01).")
@click.option("--budget-scale", type=float, help="Budget scale the campaign used.")
@handle_errors
def rank(results, config_file, seed, out_dir, workers, log_level, alpha_rank, budget_scale):
    """Rank attributes by the energy adversarial perturbations spent on them."""
    cfg = load_config(
        config_file,
        seed=seed,
        out_dir=out_dir,
        workers=workers,
        log_level=log_level,
        alpha_rank=alpha_rank,
        budget_scale=budget_scale,
    )
    result = api.rank_results(results, cfg)
    path = io.write_json(result.to_report(), Path(cfg.out_dir) / "ranking.json")
    click.echo(format_ranking(result))
    click.echo(f"Wrote {path}")


@cli.command()
@common_options
@click.option("--mode", "smoothing_mode", type=click.Choice(["isotropic", "anisotropic"]))
@click.option("--sigma", "sigmas", type=float, multiple=True, help="Noise level; repeatable.")
@click.option("--num-certify", type=int, help="Number of identities to certify.")
@click.option("--n0", type=int, help="Selection samples.")
@click.option("--n", "n_samples", type=int, help="Estimation samples.")
@click.option("--alpha", "alpha_cert", type=float, help="Failure probability of the bound.")
@click.option("--population", "population_file", type=click.Path(exists=True))
@click.option(
    "--envelope", "with_envelope", is_flag=True, help="Also write the best-over-sigma CSV."
)
@click.option("--curve-step", type=float, default=0.01, show_default=True)
@click.option("--progress/--no-progress", default=False, help="Show a progress bar.")
@handle_errors
def certify(
    config_file,
    seed,
    out_dir,
    workers,
    log_level,
    smoothing_mode,
    sigmas,
    num_certify,
    n0,
    n_samples,
    alpha_cert,
    population_file,
    with_envelope,
    curve_step,
    progress,
):
    """Certify identities with randomized smoothing."""
    cfg = load_config(
        config_file,
        seed=seed,
        out_dir=out_dir,
        workers=workers,
        log_level=log_level,
        smoothing_mode=smoothing_mode,
        num_certify=num_certify,
        n0=n0,
        n=n_samples,
        alpha_cert=alpha_cert,
        population_file=population_file,
    )
    out = Path(cfg.out_dir)
    sigma_values = list(sigmas) or [cfg.sigma]
    runs = []
    summaries = []
    for sigma in sigma_values:
        results, summary = api.run_certification(cfg, sigma, progress)
        io.write_cert_results(results, out / f"certify_{cfg.smoothing_mode}_sigma{sigma:g}.csv")
        runs.append(results)
        summaries.append(summary)
        print_summary(f"{cfg.smoothing_mode} sigma={sigma:g}", summary)

    document = {"mode": cfg.smoothing_mode, "runs": summaries}
    if with_envelope:
        best = envelope(runs)
        io.write_cert_results(best, out / f"certify_{cfg.smoothing_mode}_envelope.csv")
        best_summary = api.certification_summary(best)
        document["envelope"] = best_summary
        print_summary("envelope", best_summary)
        curve_source = best
    else:
        curve_source = runs[-1]
    curve = certified_accuracy_curve(curve_source, radii_grid(curve_source, curve_step))
    io.write_curve(curve, out / f"curve_{cfg.smoothing_mode}.csv")
    io.write_json(document, out / f"certify_{cfg.smoothing_mode}_summary.json")


@cli.command()
@click.argument("certificates", nargs=-1, required=True, type=click.Path(exists=True))
@click.option("--step", type=float, default=0.01, show_default=True, help="Radius grid step.")
@click.option(
    "--out", "output_path", type=click.Path(), default="curve.csv", show_default=True
)
@handle_errors
def curve(certificates, step, output_path):
    """Certified accuracy versus radius; several files are merged into their envelope."""
    if len(certificates) == 1:
        points = api.certification_curve(certificates[0], step)
    else:
        best = api.certification_envelope(certificates)
        points = certified_accuracy_curve(best, radii_grid(best, step))
    path = io.write_curve(points, output_path)
    click.echo(f"Wrote {len(points)} points to {path}")


@cli.command()
@common_options
@click.option("--method", type=click.Choice(["pgd", "fab"]), help="Attack paradigm.")
@click.option(
    "--grid",
    type=click.Choice(["pgd", "fab-iterations", "fab-targets"]),
    help="Pair of hyper-parameters to vary.",
)
@click.option("--num-attacked", type=int, help="Number of identities to attack.")
@handle_errors
def ablate(config_file, seed, out_dir, workers, log_level, method, grid, num_attacked):
    """Campaign metric over a grid of attack hyper-parameters."""
    cfg = load_config(
        config_file,
        seed=seed,
        out_dir=out_dir,
        workers=workers,
        log_level=log_level,
        method=method,
        num_attacked=num_attacked,
    )
    frame = api.run_ablation(cfg, grid)
    row_key, col_key = frame.attrs["axes"]
    path = io.write_frame(frame, Path(cfg.out_dir) / f"ablation_{row_key}_{col_key}.csv")
    console.print(frame.to_string(index=False))
    click.echo(f"Wrote {path}")


def main() -> None:
    """Entry point for the semrobust command."""
    cli()


if __name__ == "__main__":
    main()
