"""
Main CLI entry point for the floquet-well application.
"""

import sys
from typing import Optional, Tuple

import click
from rich.console import Console
from rich.panel import Panel

from . import __version__
from .config import MODES, parse_config
from .errors import ConfigError, FloquetWellError
from .message_utils import MessageUtils, setup_logging
from .result_table_formatter import ResultTableFormatter
from .runner import run

PREVIEW_COLUMNS = {
    "trajectory": ["F2", "Re_omega", "Im_omega", "sigma_min", "iterations"],
    "grid": ["F2", "omega", "abs_S00_sq", "arg_S00", "sigma_r0"],
    "scatter": ["omega", "Re_S00", "Im_S00", "sigma_e0", "sigma_r0"],
    "emission": ["F2", "j", "Re_k", "weight", "rate"],
}


@click.command()
@click.option(
    "--config",
    "-c",
    "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Path to a JSON run configuration",
)
@click.option(
    "--mode",
    "-m",
    type=click.Choice(MODES),
    default=None,
    help="Run mode (overrides the configuration file)",
)
@click.option(
    "--out",
    "-o",
    default=None,
    help="Output directory (default: results)",
)
@click.option(
    "--workers",
    "-w",
    type=int,
    default=None,
    help="Worker processes for grid scans (default: 1)",
)
@click.option(
    "--override",
    "overrides",
    multiple=True,
    help="Dotted key=value override, e.g. truncation.l_max=10 (repeatable)",
)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.option(
    "--quiet-progress", is_flag=True, help="Hide progress bars"
)
@click.version_option(version=__version__, prog_name="floquet-well")
def main(
    config_path: Optional[str],
    mode: Optional[str],
    out: Optional[str],
    workers: Optional[int],
    overrides: Tuple[str, ...],
    verbose: bool,
    quiet_progress: bool,
):
    """
    Floquet Well CLI - quasi-bound poles, critical points and inelastic
    scattering of a periodically driven spherical square well.

    Recipes for the standard runs live in the configs/ directory.
    """
    console = Console()
    formatter = ResultTableFormatter()
    message_utils = MessageUtils()
    setup_logging(verbose)

    console.print(
        Panel(
            "[bold cyan]Floquet Well[/bold cyan]\n"
            "Driven spherical square well: poles, critical points "
            "and S-matrix scans.",
            style="blue",
            border_style="blue",
        )
    )

    try:
        extra = list(overrides)
        if out is not None:
            extra.append(f"out={out}")
        if workers is not None:
            extra.append(f"workers={workers}")
        config = parse_config(config_path, mode, extra)
        message_utils.info(
            f"Mode {config.mode}, writing to {config.out}"
        )

        result = run(config, show_progress=not quiet_progress)

        for name, frame in result.tables.items():
            columns = [
                c for c in PREVIEW_COLUMNS.get(name, []) if c in frame.columns
            ]
            formatter.display_frame(frame, name, columns=columns or None)
        summary = {
            key: value
            for key, value in result.summary.items()
            if not isinstance(value, (list, dict))
        }
        if summary:
            formatter.display_summary(summary, "Summary")
        if result.summary.get("truncation_flagged"):
            message_utils.warning(
                "Truncation check flagged: enlarge j range or l_max"
            )

        if not result.success:
            message_utils.error(f"Run {config.mode} did not pass its checks")
            sys.exit(1)
        message_utils.success(
            f"Run {config.mode} finished; artifacts in {config.out}"
        )
    except ConfigError as e:
        message_utils.error(f"Invalid configuration: {e}")
        sys.exit(1)
    except FloquetWellError as e:
        message_utils.error(f"Run failed: {e}")
        console.print(f"\n[dim]Error details: {type(e).__name__}: {e}[/dim]")
        sys.exit(1)
    except Exception as e:
        message_utils.error(f"An unexpected error occurred: {str(e)}")
        console.print(f"\n[dim]Error details: {type(e).__name__}: {e}[/dim]")
        sys.exit(1)


if __name__ == "__main__":
    # pylint: disable=no-value-for-parameter
    main()
