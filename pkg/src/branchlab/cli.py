"""
Command-line interface for branchlab.

Usage:
    branchlab born-derive --seed 7 --out results/born
    branchlab collapse --config collapse.json --set runs=1000 --serial
    branchlab summary results/*/manifest.json
"""

import argparse
import glob
import logging
import sys
from pathlib import Path

from . import __version__
from .config import build_config, load_config_file, parse_set_items
from .experiments import EXPERIMENTS
from .formatter import get_formatter
from .output import load_manifest
from .runner import report_summary, run
from .types import BranchlabError, ConfigError, ManifestBatch

logger = logging.getLogger(__name__)

DEFAULT_OUT = Path("branchlab-out")


def _add_console_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--console",
        choices=["text", "json"],
        default="text",
        help="Console output format (default: text)",
    )
    parser.add_argument(
        "--quiet",
        "-q",
        action="store_true",
        help="Only show failing checks",
    )
    parser.add_argument(
        "--no-colour",
        action="store_true",
        help="Disable ANSI colour output",
    )
    parser.add_argument(
        "--verbose",
        "-v",
        action="store_true",
        help="Enable verbose logging",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchlab",
        description="Numerical experiments on branching, probability laws and collapse",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s branch-demo                         Branch classicality checks
  %(prog)s large-n --set N=1000 --seed 3       Smaller large-N run
  %(prog)s collapse --config c.json --serial   Deterministic ordering
  %(prog)s summary out/*/manifest.json         Aggregate earlier runs
        """,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    for name in EXPERIMENTS:
        sub = commands.add_parser(name, help=f"Run the {name} experiment")
        sub.add_argument("--config", type=Path, help="JSON config file")
        sub.add_argument("--seed", type=int, help="64-bit master seed")
        sub.add_argument("--serial", action="store_true", default=None,
                         help="Run sub-tasks sequentially")
        sub.add_argument("--out", type=Path, help=f"Output directory (default: ./{DEFAULT_OUT})")
        sub.add_argument("--format", choices=["csv", "json", "both"],
                         help="Table artifact format (default: csv)")
        sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                         help="Override an experiment parameter (repeatable)")
        _add_console_options(sub)

    summary = commands.add_parser("summary", help="Summarise manifest files")
    summary.add_argument("manifests", nargs="*", help="manifest.json files or run directories")
    _add_console_options(summary)
    return parser


def expand_paths(patterns: list[str]) -> list[Path]:
    """Expand globs and ~ into existing paths."""
    paths = []
    for pattern in patterns:
        expanded = str(Path(pattern).expanduser())
        if "*" in expanded or "?" in expanded:
            paths.extend(Path(p) for p in sorted(glob.glob(expanded, recursive=True)))
        else:
            paths.append(Path(expanded))
    return [p for p in paths if p.exists()]


def _run_summary(parsed: argparse.Namespace) -> int:
    paths = expand_paths(parsed.manifests)
    if parsed.manifests and not paths:
        print("No manifest files found", file=sys.stderr)
        return 2
    try:
        manifests = [load_manifest(p) for p in paths]
    except (OSError, ValueError, KeyError) as e:
        print(f"Error reading manifest: {e}", file=sys.stderr)
        return 2
    table = report_summary(manifests)
    formatter = _formatter(parsed)
    print(formatter.format_table(table))
    return table.exit_code


def _formatter(parsed: argparse.Namespace):  # type: ignore[no-untyped-def]
    kwargs = {}
    if parsed.console == "text":
        kwargs = {"colour": not parsed.no_colour, "quiet": parsed.quiet}
    return get_formatter(parsed.console, **kwargs)


def main(args: list[str] | None = None) -> int:
    """
    Main entry point for CLI.

    Args:
        args: Command-line arguments. Uses sys.argv if None.

    Returns:
        Exit code: 0 when every check passes, 1 for failed checks,
        2 for usage, config or unexpected errors.
    """
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    parser = build_parser()
    try:
        parsed = parser.parse_args(args)
    except SystemExit as e:
        return int(e.code) if isinstance(e.code, int) else 2

    if parsed.verbose:
        logging.getLogger().setLevel(logging.DEBUG)

    if parsed.command == "summary":
        return _run_summary(parsed)

    try:
        file_data = load_config_file(parsed.config) if parsed.config else None
        config = build_config(
            parsed.command,
            file_data,
            master_seed=parsed.seed,
            serial=parsed.serial,
            output_dir=parsed.out,
            output_format=parsed.format,
            overrides=parse_set_items(parsed.set),
        )
        if config.output_dir is None:
            config.output_dir = DEFAULT_OUT
        manifest = run(config)
    except ConfigError as e:
        print(f"Config error: {e}", file=sys.stderr)
        return 2
    except BranchlabError as e:
        logger.error(f"{parsed.command} rejected its input")
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.exception(f"Unexpected error during {parsed.command}")
        print(f"Error: {e}", file=sys.stderr)
        return 2

    batch = ManifestBatch([manifest])
    print(_formatter(parsed).format_batch(batch))
    return 0 if batch.passed else 1


if __name__ == "__main__":
    sys.exit(main())
