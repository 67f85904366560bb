"""
Type definitions shared across branchlab experiments.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Severity(Enum):
    """How much a failed check matters."""
    ERROR = "error"      # Fails the run
    WARNING = "warning"  # Reported, run still passes
    INFO = "info"        # Context only


class BranchlabError(ValueError):
    """Root of all precondition failures raised by branchlab."""


class StateError(BranchlabError):
    """Invalid state, basis or operator (tensorcore, branching, finegrain)."""


class LawError(BranchlabError):
    """Invalid probability law or law parameters."""


class CollapseError(BranchlabError):
    """Invalid collapse-model input."""


class NodalRegionError(BranchlabError):
    """Guidance velocity requested where the wave function (nearly) vanishes."""


class ConfigError(BranchlabError):
    """Experiment configuration violates its schema."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


@dataclass
class Check:
    """A single acceptance check with its measured value and verdict."""
    name: str           # e.g., "born.constraints.n=3"
    passed: bool
    measured: Any | None = None
    tolerance: Any | None = None
    severity: Severity = Severity.ERROR
    detail: str = ""

    def __str__(self) -> str:
        verdict = "ok" if self.passed else "FAILED"
        parts = [f"[{self.severity.value}] {self.name}: {verdict}"]
        if self.measured is not None:
            parts.append(f"  Measured: {self.measured}")
        if self.tolerance is not None:
            parts.append(f"  Tolerance: {self.tolerance}")
        return "\n".join(parts)


@dataclass
class RunManifest:
    """Result of running a single experiment."""
    experiment: str
    config: dict[str, Any] = field(default_factory=dict)
    version: str = ""
    wall_clock: float = 0.0
    checks: list[Check] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        """True if no ERROR-severity check failed."""
        return not any(
            not c.passed and c.severity == Severity.ERROR for c in self.checks
        )

    @property
    def failure_count(self) -> int:
        return sum(
            1 for c in self.checks if not c.passed and c.severity == Severity.ERROR
        )

    @property
    def warning_count(self) -> int:
        return sum(
            1 for c in self.checks if not c.passed and c.severity == Severity.WARNING
        )

    @property
    def check_count(self) -> int:
        return len(self.checks)


@dataclass
class ManifestBatch:
    """Several run manifests considered together."""
    manifests: list[RunManifest] = field(default_factory=list)

    @property
    def total_runs(self) -> int:
        return len(self.manifests)

    @property
    def passed_runs(self) -> int:
        return sum(1 for m in self.manifests if m.passed)

    @property
    def failed_runs(self) -> int:
        return self.total_runs - self.passed_runs

    @property
    def failure_count(self) -> int:
        return sum(m.failure_count for m in self.manifests)

    @property
    def warning_count(self) -> int:
        return sum(m.warning_count for m in self.manifests)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.manifests)
