"""Command-line entry point ``bsde``.

Subcommands::

    bsde run --preset table1 --column 1 --m 8192 --reps 50 --seed 42 --out out.csv --format csv
    bsde price --config spec.json
    bsde oracle bs --s0 100 --k 100 --r 0.06 --sigma 0.2 --t 0.5

Repetitions run on ``BSDEMC_THREADS`` worker threads (default 1). Any failure
exits nonzero with a single ``Error: ...`` line on stderr.
"""
from __future__ import annotations

import functools
import sys

import click

from . import BACKEND, __version__
from .bench import (ExperimentReport, ExperimentSpec, emit_report, preset,
                    run_experiment)
from .finance import black_scholes_call


def _one_line(fn):
    """Turn library errors into a one-line diagnostic and a nonzero exit."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except click.ClickException:
            raise
        except (ValueError, OSError, KeyError, RuntimeError) as exc:
            msg = " ".join(str(exc).split()) or type(exc).__name__
            raise click.ClickException(msg) from None

    return wrapper


def _print_summary(report: ExperimentReport) -> None:
    click.echo(f"{'M':>8}  {'mean':>10}  {'std':>10}  {'time[s]':>8}")
    for r in report.rows:
        click.echo(f"{r.m:>8d}  {r.mean:>10.4f}  {r.std:>10.4f}  {r.wall_time:>8.2f}")


def _finish(spec: ExperimentSpec, out, fmt) -> None:
    report = run_experiment(spec)
    if out:
        emit_report(report, fmt or _guess_format(out), out)
    _print_summary(report)


def _guess_format(path: str) -> str:
    return "json" if str(path).lower().endswith(".json") else "csv"


@click.group()
@click.version_option(__version__, message=f"%(version)s ({BACKEND} kernels)")
def main():
    """Regression Monte Carlo solver for backward SDEs."""


@main.command()
@click.option("--preset", "name", required=True, help="table1 ... table6")
@click.option("--column", default=1, show_default=True, type=int, help="1-based table column")
@click.option("--m", "m_values", multiple=True, type=int,
              help="path count; repeat for several (default: the table's grid)")
@click.option("--reps", type=int, help="repetitions per path count")
@click.option("--seed", type=int, help="base seed")
@click.option("--out", type=click.Path(dir_okay=False), help="report file")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              help="report format (default from the file extension)")
@_one_line
def run(name, column, m_values, reps, seed, out, fmt):
    """Reproduce one column of a results table."""
    spec = preset(name, column)
    if m_values:
        spec.m_grid = list(m_values)
    if reps is not None:
        spec.repetitions = reps
    if seed is not None:
        spec.base_seed = seed
    spec.validate()
    _finish(spec, out, fmt)


@main.command()
@click.option("--config", required=True, type=click.Path(dir_okay=False),
              help="JSON experiment description")
@click.option("--out", type=click.Path(dir_okay=False), help="report file")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]))
@_one_line
def price(config, out, fmt):
    """Run an experiment described by a JSON file."""
    _finish(ExperimentSpec.load(config), out, fmt)


@main.group()
def oracle():
    """Closed-form reference values."""


@oracle.command("bs")
@click.option("--s0", required=True, type=float)
@click.option("--k", required=True, type=float)
@click.option("--r", required=True, type=float)
@click.option("--sigma", required=True, type=float)
@click.option("--t", required=True, type=float)
@_one_line
def oracle_bs(s0, k, r, sigma, t):
    """Black-Scholes European call."""
    click.echo(f"{black_scholes_call(s0, k, r, sigma, t):.10f}")


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
