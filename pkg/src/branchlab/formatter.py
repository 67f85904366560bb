"""
Console formatters for run manifests.

Supports text (with ANSI colours) and JSON output.
"""

import json
import re
import sys
from typing import Any

from .output import json_default, manifest_to_dict
from .runner import SummaryTable
from .types import Check, ManifestBatch, RunManifest, Severity

# Pattern to match ANSI escape sequences
_ANSI_ESCAPE_PATTERN = re.compile(r"\x1b\[[0-9;]*[a-zA-Z]")


def _sanitise_for_terminal(text: str) -> str:
    """Remove ANSI escape sequences from text to prevent terminal injection."""
    return _ANSI_ESCAPE_PATTERN.sub("", text)


class BaseFormatter:
    """Base class for output formatters."""

    def format_result(self, manifest: RunManifest) -> str:
        raise NotImplementedError

    def format_summary(self, batch: ManifestBatch) -> str:
        raise NotImplementedError

    def format_table(self, table: SummaryTable) -> str:
        raise NotImplementedError

    def format_batch(self, batch: ManifestBatch) -> str:
        parts = [self.format_result(m) for m in batch.manifests]
        parts.append(self.format_summary(batch))
        return "\n".join(parts)


class PlainTextFormatter(BaseFormatter):
    """
    Formats manifests for terminal output.
    Uses ANSI colours when stdout is a TTY.
    """

    COLOURS = {
        Severity.ERROR: "\033[91m",    # Red
        Severity.WARNING: "\033[93m",  # Yellow
        Severity.INFO: "\033[94m",     # Blue
        "RESET": "\033[0m",
        "GREEN": "\033[92m",
    }

    def __init__(self, colour: bool = True, quiet: bool = False):
        """
        Args:
            colour: Enable ANSI colours. Only honoured when stdout is a TTY.
            quiet: Hide passing checks.
        """
        self.colour = colour and sys.stdout.isatty()
        self.quiet = quiet

    def _c(self, code: Severity | str) -> str:
        if not self.colour:
            return ""
        return self.COLOURS.get(code, "")

    def format_result(self, manifest: RunManifest) -> str:
        lines = []
        if manifest.passed:
            status = f"{self._c('GREEN')}PASS{self._c('RESET')}"
        else:
            status = f"{self._c(Severity.ERROR)}FAIL{self._c('RESET')}"
        name = _sanitise_for_terminal(manifest.experiment)
        lines.append(f"{status} {name} ({manifest.wall_clock:.2f}s)")

        for check in manifest.checks:
            if self.quiet and check.passed:
                continue
            lines.append(self._format_check(check))

        if manifest.artifacts:
            lines.append(f"  Artifacts: {', '.join(manifest.artifacts)}")
        lines.append("")
        return "\n".join(lines)

    def _format_check(self, check: Check) -> str:
        if check.passed:
            mark = f"{self._c('GREEN')}ok{self._c('RESET')}"
        else:
            mark = f"{self._c(check.severity)}{check.severity.value.upper()}{self._c('RESET')}"
        parts = [f"    [{mark}] {_sanitise_for_terminal(check.name)}"]
        if check.measured is not None:
            parts.append(f"           Measured: {self._format_value(check.measured)}")
        if check.tolerance is not None:
            parts.append(f"           Tolerance: {self._format_value(check.tolerance)}")
        if check.detail:
            parts.append(f"           {_sanitise_for_terminal(check.detail)}")
        return "\n".join(parts)

    def _format_value(self, value: Any) -> str:
        """Format a value for display, truncating long lists."""
        if isinstance(value, list) and len(value) > 5:
            return f"[{', '.join(repr(v) for v in value[:5])}, ...] ({len(value)} items)"
        return repr(value)

    def format_summary(self, batch: ManifestBatch) -> str:
        lines = [
            "=" * 60,
            "RUN SUMMARY",
            "=" * 60,
            f"Experiments run:  {batch.total_runs}",
            f"Passed:           {self._c('GREEN')}{batch.passed_runs}{self._c('RESET')}",
        ]
        if batch.failed_runs > 0:
            lines.append(
                f"Failed:           {self._c(Severity.ERROR)}{batch.failed_runs}{self._c('RESET')}"
            )
        lines.append(
            f"Failed checks:    {self._c(Severity.ERROR)}{batch.failure_count}{self._c('RESET')}"
        )
        if not self.quiet:
            lines.append(
                f"Warnings:         {self._c(Severity.WARNING)}{batch.warning_count}"
                f"{self._c('RESET')}"
            )
        return "\n".join(lines)

    def format_table(self, table: SummaryTable) -> str:
        lines = []
        for row in table.rows:
            if self.quiet and row.passed:
                continue
            verdict = "ok" if row.passed else row.severity.value.upper()
            lines.append(f"{row.experiment:<12} {row.check:<48} {verdict}")
        for warning in table.warnings:
            lines.append(f"{self._c(Severity.WARNING)}warning:{self._c('RESET')} {warning}")
        lines.append(f"exit code: {table.exit_code}")
        return "\n".join(lines)


class JSONFormatter(BaseFormatter):
    """Formats manifests as JSON."""

    def __init__(self, pretty: bool = True):
        self.pretty = pretty

    def _dumps(self, data: Any) -> str:
        return json.dumps(data, indent=2 if self.pretty else None, default=json_default)

    def format_result(self, manifest: RunManifest) -> str:
        return self._dumps(manifest_to_dict(manifest))

    def _summary(self, batch: ManifestBatch) -> dict[str, Any]:
        return {
            "total_runs": batch.total_runs,
            "passed_runs": batch.passed_runs,
            "failed_runs": batch.failed_runs,
            "failure_count": batch.failure_count,
            "warning_count": batch.warning_count,
            "passed": batch.passed,
        }

    def format_summary(self, batch: ManifestBatch) -> str:
        return self._dumps(self._summary(batch))

    def format_batch(self, batch: ManifestBatch) -> str:
        return self._dumps({
            "runs": [manifest_to_dict(m) for m in batch.manifests],
            "summary": self._summary(batch),
        })

    def format_table(self, table: SummaryTable) -> str:
        return self._dumps({
            "rows": [
                {
                    "experiment": r.experiment,
                    "check": r.check,
                    "passed": r.passed,
                    "severity": r.severity.value,
                    "measured": r.measured,
                    "tolerance": r.tolerance,
                }
                for r in table.rows
            ],
            "warnings": table.warnings,
            "exit_code": table.exit_code,
        })


def get_formatter(format_name: str, **kwargs: Any) -> BaseFormatter:
    """
    Get formatter by name.

    Args:
        format_name: "text" or "json"
        **kwargs: Additional arguments passed to formatter.
    """
    formatters: dict[str, type[BaseFormatter]] = {
        "text": PlainTextFormatter,
        "json": JSONFormatter,
    }
    formatter_class = formatters.get(format_name.lower())
    if not formatter_class:
        raise ValueError(f"Unknown format: {format_name}. Use 'text' or 'json'.")
    return formatter_class(**kwargs)
