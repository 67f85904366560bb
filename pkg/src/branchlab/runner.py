"""
Experiment orchestration: run a config, write artifacts, summarise manifests.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .experiments import EXPERIMENTS
from .output import ArtifactWriter, resolve_output_dir
from .types import ConfigError, ManifestBatch, RunManifest, Severity

logger = logging.getLogger(__name__)


def run(config: ExperimentConfig, out_dir: Path | None = None) -> RunManifest:
    """
    Execute the experiment named in `config` and write its artifacts.

    Args:
        config: A validated ExperimentConfig.
        out_dir: Directory for artifacts. Defaults to config.output_dir,
                 resolved against BRANCHLAB_OUT and the default location.

    Returns:
        RunManifest with every check and the artifact file names.
    """
    experiment = EXPERIMENTS.get(config.experiment)
    if experiment is None:
        raise ConfigError("experiment", f"unknown experiment {config.experiment!r}")

    target = resolve_output_dir(out_dir if out_dir is not None else config.output_dir)
    logger.info(f"Running {config.experiment} with seed {config.master_seed}")
    started = time.perf_counter()
    result = experiment(config.params, config.master_seed, config.serial)
    elapsed = time.perf_counter() - started

    writer = ArtifactWriter(target, config.output_format)
    for name, table in result.tables.items():
        writer.write_table(name, table)
    for name, document in result.documents.items():
        writer.write_document(name, document)

    manifest = RunManifest(
        experiment=config.experiment,
        config=config.to_dict(),
        version=__version__,
        wall_clock=elapsed,
        checks=result.checks,
        artifacts=sorted(writer.written),
    )
    writer.write_manifest(manifest)
    logger.info(
        f"{config.experiment} finished in {elapsed:.2f}s: "
        f"{manifest.check_count} checks, {manifest.failure_count} failed"
    )
    return manifest


@dataclass
class SummaryRow:
    experiment: str
    check: str
    passed: bool
    severity: Severity
    measured: object = None
    tolerance: object = None


@dataclass
class SummaryTable:
    """One row per check per run, with the overall exit code."""
    rows: list[SummaryRow] = field(default_factory=list)
    exit_code: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def failed(self) -> list[SummaryRow]:
        return [r for r in self.rows if not r.passed and r.severity == Severity.ERROR]


def report_summary(manifests: list[RunManifest]) -> SummaryTable:
    """
    Aggregate checks across runs. Exit code is 1 iff any ERROR check failed.
    """
    table = SummaryTable()
    if not manifests:
        table.warnings.append("No manifests to summarise")
        logger.warning("report_summary called with no manifests")
        return table

    for manifest in manifests:
        for check in manifest.checks:
            table.rows.append(SummaryRow(
                experiment=manifest.experiment,
                check=check.name,
                passed=check.passed,
                severity=check.severity,
                measured=check.measured,
                tolerance=check.tolerance,
            ))
            if not check.passed and check.severity == Severity.WARNING:
                table.warnings.append(f"{manifest.experiment}: {check.name}")

    table.exit_code = 0 if ManifestBatch(list(manifests)).passed else 1
    return table
