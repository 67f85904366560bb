"""
Fine-graining with ancillas.

A coarse state Σ_k √(m_k/M)|k⟩ is refined by attaching to outcome k an
ancilla prepared in an equal superposition of m_k states, giving M branches
that all carry amplitude √(1/M). Born probabilities then become branch
counts. Weights are exact rationals throughout.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Any

import numpy as np

from .tensorcore import Factor, StateVector, state_to_dict
from .types import StateError

logger = logging.getLogger(__name__)

READY = "ready"

Rational = Fraction | int | str


def _as_fraction(value: Rational) -> Fraction:
    if isinstance(value, bool) or isinstance(value, float):
        raise StateError(f"Weights must be exact rationals, got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, TypeError, ZeroDivisionError):
        raise StateError(f"Not a rational weight: {value!r}") from None


@dataclass(frozen=True)
class FineGrainPlan:
    """|a(k)|² = m_k / M, with Σ m_k = M."""
    M: int
    numerators: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.M < 1 or sum(self.numerators) != self.M or min(self.numerators, default=0) < 0:
            raise StateError(f"Invalid plan: numerators {self.numerators} over {self.M}")

    @property
    def weights(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(m, self.M) for m in self.numerators)

    @classmethod
    def from_weights(cls, weights: Sequence[Rational]) -> "FineGrainPlan":
        fractions = [_as_fraction(w) for w in weights]
        if not fractions:
            raise StateError("Weights must be non-empty")
        if any(f < 0 for f in fractions):
            raise StateError("Weights must be non-negative")
        if sum(fractions) != 1:
            raise StateError(f"Weights must sum to exactly 1, got {sum(fractions)}")
        M = math.lcm(*(f.denominator for f in fractions))
        return cls(M, tuple(int(f * M) for f in fractions))

    def to_dict(self) -> dict[str, Any]:
        return {
            "M": self.M,
            "numerators": list(self.numerators),
            "weights": [[w.numerator, w.denominator] for w in self.weights],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FineGrainPlan":
        return cls(int(data["M"]), tuple(int(m) for m in data["numerators"]))


@dataclass(frozen=True)
class FineBranch:
    """Branch |k⟩|j⟩ with j on outcome k's ancilla."""
    k: int
    j: int
    weight: Fraction


@dataclass(frozen=True, eq=False)
class FineGrainedState:
    """A fine-grained state with its plan and populated branches in order."""
    state: StateVector
    plan: FineGrainPlan
    branches: tuple[FineBranch, ...]
    padding: tuple[tuple[int, int], ...] = field(default=())

    def ancilla(self, k: int) -> Factor:
        return self.state.factor(f"ancilla_{k}")

    def ancilla_size(self, k: int) -> int:
        """Number of non-ready states on outcome k's ancilla."""
        return self.ancilla(k).dim - 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "plan": self.plan.to_dict(),
            "branches": [
                {"k": b.k, "j": b.j, "weight": [b.weight.numerator, b.weight.denominator]}
                for b in self.branches
            ],
            "padding": [list(p) for p in self.padding],
            "state": state_to_dict(self.state),
        }


def _build(plan: FineGrainPlan, sizes: Sequence[int]) -> FineGrainedState:
    n = len(plan.numerators)
    system = Factor("system", tuple(range(1, n + 1)))
    ancillas = [
        Factor(f"ancilla_{k}", (READY, *range(1, size + 1)))
        for k, size in enumerate(sizes, start=1)
    ]
    factors = (system, *ancillas)
    tensor = np.zeros(tuple(f.dim for f in factors), dtype=np.complex128)
    amplitude = math.sqrt(1.0 / plan.M)
    branches, padding = [], []
    for k, (m_k, size) in enumerate(zip(plan.numerators, sizes, strict=True), start=1):
        for j in range(1, size + 1):
            if j > m_k:
                padding.append((k, j))
                continue
            index = [k - 1] + [0] * n
            index[k] = j
            tensor[tuple(index)] = amplitude
            branches.append(FineBranch(k, j, Fraction(1, plan.M)))
    state = StateVector(factors, tensor.reshape(-1))
    return FineGrainedState(state, plan, tuple(branches), tuple(padding))


def fine_grain(weights: Sequence[Rational]) -> FineGrainedState:
    """
    Attach to outcome k an ancilla with m_k equally weighted states.

    Returns every populated branch with squared amplitude exactly 1/M.
    """
    plan = FineGrainPlan.from_weights(weights)
    fg = _build(plan, plan.numerators)
    logger.debug(f"fine_grain {plan.weights}: {len(fg.branches)} branches of 1/{plan.M}")
    return fg


def branch_count_probability(plan: FineGrainPlan | FineGrainedState) -> tuple[Fraction, ...]:
    """Probability of each outcome as (number of its branches) / (total branches)."""
    if isinstance(plan, FineGrainedState):
        counts = [0] * len(plan.plan.numerators)
        for branch in plan.branches:
            counts[branch.k - 1] += 1
        total = len(plan.branches)
        return tuple(Fraction(c, total) for c in counts)
    return tuple(Fraction(m, plan.M) for m in plan.numerators)


class SwapVerdict(Enum):
    ADMISSIBLE = "admissible"
    DISSIMILAR = "dissimilar"


@dataclass
class SwapReport:
    """Structural comparison of two fine-grained branches."""
    i: int
    j: int
    verdict: SwapVerdict
    signature_i: tuple[int, int]
    signature_j: tuple[int, int]
    exchanges_system_labels: bool

    @property
    def admissible(self) -> bool:
        return self.verdict is SwapVerdict.ADMISSIBLE

    @property
    def detail(self) -> str:
        parts = []
        if not self.admissible:
            parts.append(
                f"ancilla sizes differ ({self.signature_i[1]} vs {self.signature_j[1]})"
            )
        if self.exchanges_system_labels:
            parts.append("swap exchanges system labels on this pair only")
        return "; ".join(parts)


def swap_admissibility(fg: FineGrainedState, i: int, j: int) -> SwapReport:
    """
    Compare branches i and j (1-based, in construction order).

    Admissible iff both branches sit on ancillas of the same size. The report
    also flags a swap that exchanges the system label on these two branches
    while leaving it alone on all others.
    """
    count = len(fg.branches)
    for index in (i, j):
        if not 1 <= index <= count:
            raise StateError(f"Branch index {index} out of range 1..{count}")
    bi, bj = fg.branches[i - 1], fg.branches[j - 1]
    sig_i = (fg.state.factors[0].dim, fg.ancilla_size(bi.k))
    sig_j = (fg.state.factors[0].dim, fg.ancilla_size(bj.k))
    verdict = SwapVerdict.ADMISSIBLE if sig_i == sig_j else SwapVerdict.DISSIMILAR
    return SwapReport(i, j, verdict, sig_i, sig_j, exchanges_system_labels=bi.k != bj.k)


def uniformize_workaround(weights: Sequence[Rational]) -> FineGrainedState:
    """
    Two-outcome fine-graining with both ancillas drawn from the same alphabet:
    the smaller ancilla is padded with zero-amplitude states.
    """
    plan = FineGrainPlan.from_weights(weights)
    if len(plan.numerators) != 2:
        raise StateError("uniformize_workaround takes exactly two weights")
    size = max(plan.numerators)
    return _build(plan, (size, size))
