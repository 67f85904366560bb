"""Pytest fixtures for branchlab tests."""

import math
from pathlib import Path

import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    """A fixed-seed generator so every test sees the same draws."""
    return np.random.default_rng(20240917)


@pytest.fixture
def two_branch_amplitudes() -> list[float]:
    return [math.sqrt(0.9), math.sqrt(0.1)]


@pytest.fixture
def three_branch_amplitudes() -> list[float]:
    return [math.sqrt(0.5), math.sqrt(0.3), math.sqrt(0.2)]


@pytest.fixture
def out_dir(tmp_path: Path) -> Path:
    """Return an empty artifact directory under tmp_path."""
    return tmp_path / "out"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Keep the caller's output overrides out of the tests."""
    monkeypatch.delenv("BRANCHLAB_OUT", raising=False)
    monkeypatch.delenv("XDG_DATA_HOME", raising=False)
