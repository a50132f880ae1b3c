"""
The ``cellarium-warp`` command line.

Exit status: 0 on success, 1 when ``verify`` finds a failing property, 2 on invalid configurations and arguments,
3 on unreadable or unwritable files.
"""

import functools
import typing as t

import click

from cellarium.warp import constants, exceptions, experiments
from cellarium.warp.logging import set_verbosity
from cellarium.warp.version import get_version

_IO_ERRORS = (exceptions.ArtifactIOError, exceptions.DatasetFormatError, exceptions.CheckpointError, OSError)


def exit_code_for(error: BaseException) -> constants.ExitCode:
    """Exit status reported for an error raised by a subcommand."""
    if isinstance(error, _IO_ERRORS):
        return constants.ExitCode.IO_ERROR
    return constants.ExitCode.CONFIG_ERROR


def _reports_errors(command: t.Callable) -> t.Callable:
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return command(*args, **kwargs)
        except (exceptions.WarpBaseError, OSError) as e:
            code = exit_code_for(e)
            click.echo(f"Error: {e}", err=True)
            ctx.exit(int(code))

    return wrapper


def _common_options(command: t.Callable) -> t.Callable:
    command = click.option("--seed", type=int, default=None, help="Override the configured seed.")(command)
    command = click.option(
        "--out",
        "out_dir",
        type=click.Path(file_okay=False),
        default=".",
        show_default=True,
        help="Output directory, created if missing.",
    )(command)
    return command


_config_option = click.option(
    "--config", "config_path", type=click.Path(dir_okay=False), required=True, help="JSON run configuration."
)


@click.group()
@click.version_option(version=get_version(), prog_name="cellarium-warp")
@click.option("--verbose", "-v", is_flag=True, help="Log debug messages.")
def main(verbose: bool) -> None:
    """Warped proxy-based losses: landscapes, property checks, training and evaluation."""
    set_verbosity(verbose)


@main.command()
@_config_option
@_common_options
@_reports_errors
def landscape(config_path: str, out_dir: str, seed: t.Optional[int]) -> None:
    """Evaluate a binary loss landscape and its extrema."""
    report = experiments.cmd_landscape(config_path, out_dir, seed=seed)
    click.echo(f"extrema: {report.verdict.value}")


@main.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None, help="JSON run configuration.")
@click.option("--resolution", type=int, default=None, help="Grid resolution of the landscape properties.")
@_common_options
@_reports_errors
def verify(config_path: t.Optional[str], resolution: t.Optional[int], out_dir: str, seed: t.Optional[int]) -> None:
    """Run the landscape and loss property suite; exit 1 if a property fails."""
    report = experiments.cmd_verify(out_dir, config_path=config_path, seed=seed, resolution=resolution)
    for result in report.properties:
        click.echo(f"{result.name}: {'ok' if result.ok else 'FAILED'}")
    if not report.passed:
        click.get_current_context().exit(int(constants.ExitCode.PROPERTY_FAILURE))


@main.command()
@_config_option
@_common_options
@_reports_errors
def train(config_path: str, out_dir: str, seed: t.Optional[int]) -> None:
    """Train an embedder with the warped loss and evaluate it."""
    outcome = experiments.cmd_train(config_path, out_dir, seed=seed)
    if outcome.trace.diverged:
        click.echo(f"diverged after {len(outcome.trace.steps)} steps", err=True)


@main.command(name="eval")
@_config_option
@_common_options
@_reports_errors
def evaluate(config_path: str, out_dir: str, seed: t.Optional[int]) -> None:
    """Evaluate a checkpoint on a test split."""
    result = experiments.cmd_eval(config_path, out_dir, seed=seed)
    for name, value in result.to_flat_dict().items():
        click.echo(f"{name}: {value:.4f}")


@main.command()
@_config_option
@_common_options
@_reports_errors
def sweep(config_path: str, out_dir: str, seed: t.Optional[int]) -> None:
    """Train once per value of a warp parameter."""
    frame = experiments.cmd_sweep(config_path, out_dir, seed=seed)
    click.echo(frame.to_string(index=False))


@main.command()
@_config_option
@_common_options
@_reports_errors
def ablation(config_path: str, out_dir: str, seed: t.Optional[int]) -> None:
    """Train once per warp pair expression."""
    frame = experiments.cmd_ablation(config_path, out_dir, seed=seed)
    click.echo(frame.to_string(index=False))
