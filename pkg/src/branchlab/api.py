"""
Lightweight API for running experiments from Python.

These functions skip CLI argument parsing but go through the same config
validation and artifact writing.
"""

from pathlib import Path
from typing import Any

from .config import build_config
from .output import load_manifest
from .runner import SummaryTable, report_summary, run
from .types import RunManifest


def run_experiment(
    experiment: str,
    params: dict[str, Any] | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
    output_format: str = "csv",
    serial: bool = True,
) -> RunManifest:
    """
    Run one experiment.

    Args:
        experiment: branch-demo, born-derive, large-n, collapse, finegrain or bohm.
        params: Parameter overrides, validated against the experiment's schema.
        seed: 64-bit master seed.
        out_dir: Artifact directory (BRANCHLAB_OUT still takes precedence).
        output_format: "csv", "json" or "both" for tables.
        serial: Run sub-tasks sequentially.

    Returns:
        RunManifest with every check.

    Example:
        from branchlab import run_experiment

        manifest = run_experiment("finegrain", {"weights": ["1/3", "2/3"]}, out_dir="out")
        print(manifest.passed)
    """
    config = build_config(
        experiment,
        master_seed=seed,
        serial=serial,
        output_dir=Path(out_dir) if out_dir is not None else None,
        output_format=output_format,
        overrides=params,
    )
    return run(config)


def summarize(paths: list[str | Path]) -> SummaryTable:
    """Summarise manifest files (or run directories containing manifest.json)."""
    return report_summary([load_manifest(Path(p)) for p in paths])
