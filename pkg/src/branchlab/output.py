"""
Artifact writing and output directory resolution.

Data artifacts (CSV tables, JSON documents) never contain timestamps, so
identical serial runs write byte-identical files. Wall-clock time lives only
in manifest.json.
"""

import enum
import json
import logging
import os
from dataclasses import asdict
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .types import Check, RunManifest, Severity

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
FLOAT_FORMAT = "%.17g"


def default_output_dir() -> Path:
    """
    Where artifacts go when nothing else is specified.

    Order of precedence:
    1. BRANCHLAB_OUT environment variable
    2. XDG_DATA_HOME/branchlab
    3. ~/.local/share/branchlab
    """
    env_out = os.environ.get("BRANCHLAB_OUT")
    if env_out:
        return Path(env_out)

    xdg_data = os.environ.get("XDG_DATA_HOME")
    if xdg_data:
        return Path(xdg_data) / "branchlab"

    return Path.home() / ".local" / "share" / "branchlab"


def resolve_output_dir(requested: Path | None) -> Path:
    """BRANCHLAB_OUT overrides any requested directory."""
    env_out = os.environ.get("BRANCHLAB_OUT")
    if env_out:
        return Path(env_out)
    return requested if requested is not None else default_output_dir()


def json_default(value: Any) -> Any:
    """Serialise the non-JSON types experiments produce."""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return [value.numerator, value.denominator]
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, enum.Enum):
        return value.value
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serialisable")


def dumps(document: Any) -> str:
    return json.dumps(document, indent=2, sort_keys=True, default=json_default, ensure_ascii=False)


class ArtifactWriter:
    """Writes tables and documents into one run directory."""

    def __init__(self, out_dir: Path, output_format: str = "csv"):
        self.out_dir = out_dir
        self.output_format = output_format
        self.written: list[str] = []

    def _path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        return self.out_dir / name

    def write_table(self, name: str, frame: pd.DataFrame) -> None:
        if self.output_format in ("csv", "both"):
            path = self._path(f"{name}.csv")
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            self.written.append(path.name)
        if self.output_format in ("json", "both"):
            path = self._path(f"{name}.json")
            path.write_text(dumps(frame.to_dict(orient="records")) + "\n")
            self.written.append(path.name)

    def write_document(self, name: str, document: dict[str, Any]) -> None:
        path = self._path(f"{name}.json")
        path.write_text(dumps(document) + "\n")
        self.written.append(path.name)

    def write_manifest(self, manifest: RunManifest) -> Path:
        path = self._path(MANIFEST_NAME)
        path.write_text(dumps(manifest_to_dict(manifest)) + "\n")
        logger.info(f"Wrote manifest to {path}")
        return path


def manifest_to_dict(manifest: RunManifest) -> dict[str, Any]:
    data = asdict(manifest)
    data["passed"] = manifest.passed
    data["failure_count"] = manifest.failure_count
    data["warning_count"] = manifest.warning_count
    return data


def load_manifest(path: Path) -> RunManifest:
    """Read a manifest.json back (or the manifest inside a run directory)."""
    if path.is_dir():
        path = path / MANIFEST_NAME
    data = json.loads(path.read_text())
    checks = [
        Check(
            name=c["name"],
            passed=c["passed"],
            measured=c.get("measured"),
            tolerance=c.get("tolerance"),
            severity=Severity(c.get("severity", "error")),
            detail=c.get("detail", ""),
        )
        for c in data.get("checks", [])
    ]
    return RunManifest(
        experiment=data["experiment"],
        config=data.get("config", {}),
        version=data.get("version", ""),
        wall_clock=data.get("wall_clock", 0.0),
        checks=checks,
        artifacts=data.get("artifacts", []),
    )
