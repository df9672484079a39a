#!/usr/bin/env python3
"""Command-line interface for the doubling Fock space Toeplitz laboratory."""

import functools
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import click

from . import __version__
from .config import ConfigManager, ExperimentConfig
from .errors import FockToeplitzError


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.WARNING, format="%(message)s",
                        force=True)


def run_options(func):
    """Options shared by every scenario command."""

    @click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False),
                  help="Experiment config (JSON); defaults to the saved user config")
    @click.option("--out", "-o", type=click.Path(file_okay=False),
                  help="Report directory (overrides output.dir)")
    @click.option("--seed", type=int, help="Master seed (overrides config)")
    @click.option("--threads", "-j", type=click.IntRange(min=1),
                  help="Worker processes (overrides config and FOCK_TOEPLITZ_THREADS)")
    @click.option("--progress", is_flag=True, help="Show progress bars")
    @click.option("--diagnostics", is_flag=True, help="Print tracebacks on errors")
    @click.option("--verbose", "-v", is_flag=True, help="Log progress messages")
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        return func(*args, **kwargs)

    return wrapper


def _load(config_path: Optional[str], out: Optional[str], seed: Optional[int],
          threads: Optional[int]) -> ExperimentConfig:
    cfg = ExperimentConfig.from_dict(ConfigManager().load(config_path))
    overrides = {}
    if seed is not None:
        overrides["seed"] = seed
    if threads is not None:
        overrides["threads"] = threads
    if out is not None:
        overrides["output_dir"] = out
    return cfg.with_overrides(**overrides) if overrides else cfg


def _execute(names: Sequence[str], config_path: Optional[str], out: Optional[str],
             seed: Optional[int], threads: Optional[int], progress: bool, diagnostics: bool,
             verbose: bool) -> None:
    _setup_logging(verbose)
    try:
        from .main import run_scenarios

        cfg = _load(config_path, out, seed, threads)

        click.echo("\n" + "=" * 70)
        click.secho("🔬 Running Scenarios", fg="cyan", bold=True)
        click.echo("=" * 70)
        click.echo(f"Scenarios: {', '.join(names)}")
        click.echo(f"Potential: {cfg.potential.get('kind')}")
        click.echo(f"Degree N:  {cfg.degree}")
        click.echo(f"Seed:      {cfg.seed}")
        click.echo(f"Output:    {cfg.output_dir}")
        click.echo("=" * 70 + "\n")

        results = run_scenarios(cfg, names, progress=progress, threads=threads)

        for name, path in results["paths"].items():
            failed = results["failed_flags"][name]
            if failed:
                click.secho(f"❌ {name}: {len(failed)} flag(s) failed -> {path}", fg="red")
                for flag in failed:
                    click.echo(f"   • {flag}")
            else:
                click.secho(f"✅ {name}: all flags passed -> {path}", fg="green")
        click.echo(f"\nProcessing time: {results['processing_time']:.1f}s")

    except KeyboardInterrupt:
        click.echo("\n\n⚠️  Run cancelled by user.")
        sys.exit(130)
    except Exception as e:
        click.secho(f"\n❌ Error: {e}", fg="red")
        if diagnostics:
            import traceback
            click.echo("\n" + traceback.format_exc())
        sys.exit(1)

    if not results["passed"]:
        sys.exit(1)


@click.group()
@click.version_option(version=__version__, prog_name="fock-toeplitz")
def main():
    """Numerical checks for Toeplitz operators on doubling Fock spaces.

    \b
    Quick Start:
      fock-toeplitz all                        # Every scenario with the saved config
      fock-toeplitz schatten -c exp.json       # One scenario, explicit config
      fock-toeplitz init-config exp.json       # Write the defaults to edit
      fock-toeplitz show-config                # Show the config a run would use

    \b
    Exit codes: 0 all flags passed, 1 error or failed flag, 130 interrupted.
    """


def _scenario_command(name: str, help_text: str):
    @main.command(name=name, help=help_text)
    @run_options
    def command(config_path, out, seed, threads, progress, diagnostics, verbose):
        _execute([name], config_path, out, seed, threads, progress, diagnostics, verbose)

    return command


_scenario_command("geometry", "Radius function, disk masses, sigma and geodesic distance.")
_scenario_command("carleson", "Averaging and Berezin transforms against embedding bounds.")
_scenario_command("toeplitz", "Operator norm, kernel action statistic and Berezin sup.")
_scenario_command("schatten", "Schatten norms against the transform and lattice quantities.")
_scenario_command("trace", "Trace identities in matrix, integral and sigma form.")


@main.command(name="all")
@run_options
def run_all_command(config_path, out, seed, threads, progress, diagnostics, verbose):
    """Run every scenario."""
    from .main import scenario_names

    _execute(scenario_names(), config_path, out, seed, threads, progress, diagnostics, verbose)


@main.command(name="show-config")
@click.option("--config", "-c", "config_path", type=click.Path(dir_okay=False))
def show_config(config_path: Optional[str]):
    """Show the merged configuration and exit."""
    config_manager = ConfigManager()
    try:
        config = config_manager.load(config_path)
    except FockToeplitzError as e:
        click.secho(f"\n❌ Error: {e}", fg="red")
        sys.exit(1)
    config_manager.display(config)
    click.echo(f"Config file: {config_path or config_manager.get_config_path()}")


@main.command(name="init-config")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--force", is_flag=True, help="Overwrite an existing file")
def init_config(path: str, force: bool):
    """Write the default configuration to PATH."""
    target = Path(path)
    if target.exists() and not force:
        if not click.confirm(f"\n⚠️  {target} exists. Overwrite?", default=False):
            return
    config_manager = ConfigManager()
    config_manager.save(config_manager.defaults(), target)
    click.secho(f"✅ Default configuration written to: {target}", fg="green")


@main.command(name="reset-config")
def reset_config():
    """Reset the saved user configuration to defaults."""
    if click.confirm("\n⚠️  Reset all settings to defaults?", default=False):
        path = ConfigManager().reset()
        click.secho(f"✅ Configuration reset to defaults: {path}", fg="green")


if __name__ == "__main__":
    main()
