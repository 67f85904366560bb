"""
branchlab

Numerical testbed for branching, probability-law and collapse claims in
linear quantum mechanics.

Usage:
    branchlab born-derive
    branchlab large-n --set N=1000 --seed 3
"""

__version__ = "1.0.0"

from .api import run_experiment, summarize  # noqa: E402
from .types import Check, RunManifest, Severity  # noqa: E402

__all__ = [
    "run_experiment",
    "summarize",
    "Check",
    "RunManifest",
    "Severity",
]
