"""
ergojump CLI
"""

import json
import logging
import sys
from pathlib import Path
from typing import Callable, Optional

import click
from rich import print, print_json, traceback

import ergojump
from ergojump._config import FileConfig, RunConfig
from ergojump._config.experiment_config import (
    EXPERIMENTS,
    ExperimentConfig,
    default_config,
    dump_config,
    load_config,
)
from ergojump._config.logging_config import set_up_logging
from ergojump.exceptions import ErgoJumpError, UsageError
from ergojump.models._base import ErgoModel
from ergojump.runner import run_experiment, write_failure

logger = logging.getLogger(__name__)


class ErgoJumpContext(ErgoModel):
    """
    Context Object to Pass Around CLI
    """

    debug: bool


debug_option = click.option(
    "--debug/--no-debug", default=False, help="Enable extra debugging output"
)
config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="YAML experiment config; defaults are used when omitted",
)
seed_option = click.option(
    "--seed",
    type=click.IntRange(min=0, max=2**64 - 1),
    default=None,
    help="Master seed, overrides the config",
)
out_option = click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Output directory, overrides the config and ERGOJUMP_OUTPUT_DIR",
    envvar="ERGOJUMP_OUTPUT_DIR",
)
threads_option = click.option(
    "--threads",
    type=click.IntRange(min=1),
    default=None,
    help="Worker threads, results do not depend on it",
    envvar="ERGOJUMP_THREADS",
)


@click.group(invoke_without_command=True)
@click.version_option(version=ergojump.__version__, prog_name=ergojump.__application__)
@debug_option
@click.pass_context
def cli(ctx: click.core.Context, debug: bool) -> None:
    """
    Ergodicity experiments for jump SDEs
    """
    ctx.obj = ErgoJumpContext(debug=debug)
    traceback.install(show_locals=debug)
    set_up_logging(log_level=logging.DEBUG if debug is True else logging.INFO)
    if ctx.invoked_subcommand is None:
        click.echo(ctx.get_help())


def resolve_config(
    experiment: str,
    config_path: Optional[Path],
    seed: Optional[int],
    out_dir: Optional[Path],
    threads: Optional[int],
) -> ExperimentConfig:
    """
    Config of a subcommand: the file (which must name the same experiment)
    or the defaults, with the command line overrides applied

    Raises
    ------
    UsageError
        When the file describes another experiment
    """
    if config_path is None:
        return default_config(experiment, seed=seed, output=out_dir, threads=threads)
    config = load_config(config_path)
    if config.experiment != experiment:
        raise UsageError(
            f"{config_path} describes a {config.experiment!r} experiment, "
            f"not {experiment!r}"
        )
    return config.with_overrides(seed=seed, output=out_dir, threads=threads)


def _experiment_command(experiment: str) -> Callable[..., None]:
    @config_option
    @seed_option
    @out_option
    @threads_option
    def command(
        config_path: Optional[Path],
        seed: Optional[int],
        out_dir: Optional[Path],
        threads: Optional[int],
    ) -> None:
        try:
            config = resolve_config(experiment, config_path, seed, out_dir, threads)
        except ErgoJumpError as error:
            logger.error(error)
            location = write_failure(error, out_dir)
            print(f"[bold red]{type(error).__name__}[/bold red]: failure record at {location}")
            sys.exit(1)
        status = run_experiment(config)
        out = RunConfig.get_output_dir(config.output)
        result_file = FileConfig.REPORT_FILE if status == 0 else FileConfig.FAILURE_FILE
        print_json(data=json.loads(out.joinpath(result_file).read_text(encoding="utf-8")))
        if status != 0:
            sys.exit(status)

    command.__doc__ = f"""
    Run the {experiment} experiment
    """
    return command


for _experiment in EXPERIMENTS:
    cli.command(name=_experiment)(_experiment_command(_experiment))


@cli.group()
def config() -> None:
    """
    Inspect experiment configs
    """


@config.command("show")
@click.option(
    "--experiment",
    type=click.Choice(list(EXPERIMENTS)),
    default=None,
    help="Show the defaults of an experiment kind",
)
@config_option
@seed_option
@out_option
@threads_option
def config_show(
    experiment: Optional[str],
    config_path: Optional[Path],
    seed: Optional[int],
    out_dir: Optional[Path],
    threads: Optional[int],
) -> None:
    """
    Print the normalised config with every default filled in
    """
    if config_path is None and experiment is None:
        raise click.UsageError("pass --config or --experiment")
    try:
        if config_path is not None:
            loaded = load_config(config_path).with_overrides(
                seed=seed, output=out_dir, threads=threads
            )
        else:
            loaded = default_config(experiment, seed=seed, output=out_dir, threads=threads)
    except ErgoJumpError as error:
        print(f"[bold red]{type(error).__name__}[/bold red]: {error}")
        sys.exit(1)
    click.echo(dump_config(loaded), nl=False)
