"""
Candidate probability laws and the checks that single out P = |a|².

A ProbabilityLaw maps (outcome index k, squared amplitude x) to a probability.
The checks here mechanise the derivation:

- check_constraints: Σ_k P_k(|a(k)|²) = 1 on sampled normalised amplitudes.
- lagrange_residual: (1/a(k))·∂P_k/∂a(k) must be one common constant λ.
- compose_auxiliary: P_{1+2,k,j} = P_k · P_{2,j given k} for a second,
  outcome-dependent experiment.
- derive_born: solve the affine family P_k = (λ/2)x + c(k) against the
  composition conditions; the unique solution is λ = 2, c = 0.
"""

import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from .tensorcore import Factor, StateVector, inner_product
from .types import LawError, StateError

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-10
DEFAULT_FD_STEP = 1e-5
RANGE_GRID = 1001
MAX_COUNTEREXAMPLE_EPSILON = 0.1


class LawKind(Enum):
    """Families of candidate probability laws."""
    BORN = "born"
    AFFINE_QUADRATIC = "affine_quadratic"
    ODD_COUNTEREXAMPLE = "odd_counterexample"
    GENERAL_AFFINE = "general_affine"
    COUNTING = "counting"
    CUSTOM = "custom"


LawFunction = Callable[[int, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class ProbabilityLaw:
    """
    A candidate map (k, x = |a(k)|²) → probability.

    `claimed_n` records for which outcome counts the sum-to-one constraint is
    claimed ("all", or a specific count). Laws never see anything but k and x.
    """
    kind: LawKind
    params: Mapping[str, Any] = field(default_factory=dict)
    claimed_n: str = "all"
    function: LawFunction | None = None
    label: str = ""

    @property
    def identifier(self) -> str:
        if self.label:
            return self.label
        if not self.params:
            return self.kind.value
        args = ",".join(f"{key}={value}" for key, value in self.params.items())
        return f"{self.kind.value}({args})"

    def evaluate(self, k: int, x: Any) -> np.ndarray:
        """P_k(x), vectorised over x."""
        x = np.asarray(x, dtype=float)
        match self.kind:
            case LawKind.BORN:
                return x.copy()
            case LawKind.AFFINE_QUADRATIC:
                return self.params["alpha"] * x + self.params["beta"] * x**2
            case LawKind.ODD_COUNTEREXAMPLE:
                return x + self.params["epsilon"] * np.sin(2 * np.pi * x)
            case LawKind.GENERAL_AFFINE:
                return 0.5 * self.params["lam"] * x + self.offset(k)
            case LawKind.COUNTING:
                return np.full_like(x, 1.0 / self.params["outcomes"])
            case LawKind.CUSTOM:
                assert self.function is not None
                return np.asarray(self.function(k, x), dtype=float)
        raise LawError(f"Unknown law kind {self.kind}")

    def log_evaluate(self, k: int, log_x: Any) -> np.ndarray:
        """log P_k(x) given log x; stays finite where x itself underflows."""
        log_x = np.asarray(log_x, dtype=float)
        with np.errstate(divide="ignore"):
            match self.kind:
                case LawKind.BORN:
                    return log_x.copy()
                case LawKind.AFFINE_QUADRATIC:
                    alpha, beta = self.params["alpha"], self.params["beta"]
                    return np.logaddexp(np.log(alpha) + log_x, np.log(beta) + 2 * log_x)
                case LawKind.ODD_COUNTEREXAMPLE:
                    # sin(2πx)/x = 2π·sinc(2x)
                    x = np.exp(log_x)
                    eps = self.params["epsilon"]
                    return log_x + np.log1p(eps * 2 * np.pi * np.sinc(2 * x))
                case LawKind.GENERAL_AFFINE:
                    half = 0.5 * self.params["lam"]
                    c = self.offset(k)
                    if c == 0:
                        return np.log(half) + log_x
                    return np.log(half * np.exp(log_x) + c)
                case LawKind.COUNTING:
                    return np.full_like(log_x, -math.log(self.params["outcomes"]))
                case _:
                    return np.log(self.evaluate(k, np.exp(log_x)))

    def offset(self, k: int) -> float:
        """c(k) of a general affine law; offsets repeat cyclically over k."""
        offsets = self.params["offsets"]
        return float(offsets[(k - 1) % len(offsets)])


# Constructors


def born_law() -> ProbabilityLaw:
    return ProbabilityLaw(LawKind.BORN)


def affine_quadratic(alpha: float = 0.8, beta: float = 0.2) -> ProbabilityLaw:
    """P(x) = αx + βx²; the hypothetical micro-law with α=.8, β=.2."""
    if alpha < 0 or beta < 0 or alpha + beta == 0:
        raise LawError(f"affine_quadratic needs α, β ≥ 0 not both zero, got {alpha}, {beta}")
    claimed = "all" if beta == 0 and alpha == 1 else "none"
    return ProbabilityLaw(
        LawKind.AFFINE_QUADRATIC, {"alpha": alpha, "beta": beta}, claimed_n=claimed
    )


def counterexample_law(epsilon: float) -> ProbabilityLaw:
    """P_i(x) = x + ε·sin(2πx): odd about x = 1/2, sums to one only for n = 2."""
    if not 0.0 <= epsilon <= MAX_COUNTEREXAMPLE_EPSILON:
        raise LawError(
            f"Counterexample ε must lie in [0, {MAX_COUNTEREXAMPLE_EPSILON}], got {epsilon}"
        )
    if epsilon == 0.0:
        return born_law()
    return ProbabilityLaw(LawKind.ODD_COUNTEREXAMPLE, {"epsilon": epsilon}, claimed_n="2")


def general_affine(lam: float, offsets: float | Sequence[float] = 0.0) -> ProbabilityLaw:
    """P_k(x) = (λ/2)x + c(k)."""
    if isinstance(offsets, int | float):
        offsets = (float(offsets),)
    offsets = tuple(float(c) for c in offsets)
    if not offsets:
        raise LawError("general_affine needs at least one offset")
    return ProbabilityLaw(LawKind.GENERAL_AFFINE, {"lam": lam, "offsets": offsets})


def counting_law(outcomes: int) -> ProbabilityLaw:
    """Every version weighted equally: P_k = 1/n whatever the amplitudes."""
    if outcomes < 1:
        raise LawError("counting_law needs at least one outcome")
    return ProbabilityLaw(LawKind.COUNTING, {"outcomes": outcomes}, claimed_n=str(outcomes))


def custom_law(function: LawFunction, label: str, claimed_n: str = "none") -> ProbabilityLaw:
    return ProbabilityLaw(LawKind.CUSTOM, {}, claimed_n, function, label)


def law_from_name(name: str, **params: Any) -> ProbabilityLaw:
    """
    Build a law by name.

    Args:
        name: "born", "affine_quadratic", "odd_counterexample",
              "general_affine" or "counting".
        **params: Constructor parameters for that law.
    """
    builders: dict[str, Callable[..., ProbabilityLaw]] = {
        "born": born_law,
        "affine_quadratic": affine_quadratic,
        "odd_counterexample": counterexample_law,
        "general_affine": general_affine,
        "counting": counting_law,
    }
    builder = builders.get(name.lower())
    if builder is None:
        raise LawError(f"Unknown law: {name}. Use one of {', '.join(builders)}.")
    try:
        return builder(**params)
    except TypeError as e:
        raise LawError(f"Bad parameters for law {name!r}: {e}") from None


# Reports


@dataclass
class ConstraintReport:
    """Sum-to-one and range checks of a law over sampled amplitude points."""
    n: int
    samples: int
    max_sum_violation: float
    max_range_violation: float
    worst_point: list[float] = field(default_factory=list)


@dataclass
class ReductionResult:
    """|ψ⟩ = phase·a1|target⟩ + √(1-a1²)|remainder⟩."""
    a1: float
    phase: complex
    remainder: StateVector | None
    degenerate: bool = False


@dataclass
class LagrangeReport:
    """(1/a(k))·∂P_k/∂a(k) per outcome and their pairwise differences."""
    values: list[float | None]
    skipped: list[int]
    residuals: np.ndarray
    max_residual: float


@dataclass
class CompositionReport:
    """Violations |P_{1+2,k,j} − P_k·P_{2,j given k}| for every (k, j)."""
    violations: dict[tuple[int, int], float]
    max_violation: float
    composed: StateVector | None = None


@dataclass
class Probe:
    """One composition probe: outcome k with |a(k)|² = x and several |b(k,j)|²."""
    k: int
    x: float
    y_values: tuple[float, ...]


@dataclass
class BornDerivation:
    """Solved parameters of the general affine family."""
    lam: float
    offsets: list[float]
    rank: int
    residual: float


# Operations


def _check_normalized(values: Sequence[complex], what: str) -> None:
    total = sum(abs(v) ** 2 for v in values)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise StateError(f"{what} is not normalised: Σ|·|² = {total!r}")


def range_violation(law: ProbabilityLaw, n: int, grid: int = RANGE_GRID) -> float:
    """Largest excursion of P_k(x) outside [0, 1] on a grid of x in [0, 1]."""
    x = np.linspace(0.0, 1.0, grid)
    worst = 0.0
    for k in range(1, n + 1):
        p = law.evaluate(k, x)
        below = float(np.max(np.maximum(-p, 0.0)))
        above = float(np.max(np.maximum(p - 1, 0.0)))
        worst = max(worst, below, above)
    return worst


def check_constraints(
    law: ProbabilityLaw,
    n: int,
    samples: int,
    rng_seed: int,
    extra_points: Sequence[Sequence[float]] = (),
) -> ConstraintReport:
    """
    Sample points uniformly on the positive orthant of the real amplitude
    sphere and report the worst |Σ_k P_k(a(k)²) − 1|.
    """
    if n < 2:
        raise LawError(f"check_constraints needs n ≥ 2, got {n}")
    rng = np.random.default_rng(rng_seed)
    z = np.abs(rng.standard_normal((samples, n)))
    a = z / np.linalg.norm(z, axis=1, keepdims=True)
    if extra_points:
        extra = np.asarray(extra_points, dtype=float)
        if extra.shape[1] != n:
            raise LawError("extra_points must have n components")
        a = np.vstack([a, extra])
    x = a**2
    totals = sum(law.evaluate(k, x[:, k - 1]) for k in range(1, n + 1))
    deviation = np.abs(np.asarray(totals) - 1.0)
    worst = int(np.argmax(deviation)) if deviation.size else 0
    return ConstraintReport(
        n=n,
        samples=int(a.shape[0]),
        max_sum_violation=float(deviation[worst]) if deviation.size else 0.0,
        max_range_violation=range_violation(law, n),
        worst_point=a[worst].tolist() if deviation.size else [],
    )


def single_detector_reduction(psi: StateVector, target: StateVector) -> ReductionResult:
    """
    Split ψ into its component along a detected target and the orthogonal
    remainder, with phases absorbed so both coefficients are real.
    """
    if abs(psi.norm() - 1.0) > NORMALIZATION_TOL:
        raise StateError("single_detector_reduction requires a normalised state")
    if abs(target.norm() - 1.0) > NORMALIZATION_TOL:
        raise StateError("single_detector_reduction requires a normalised target")
    overlap = inner_product(target, psi)
    a1 = min(abs(overlap), 1.0)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0 + 0j
    rest = psi.amps - overlap * target.amps
    rest_norm = float(np.linalg.norm(rest))
    if rest_norm <= 1e-12:
        return ReductionResult(a1=a1, phase=phase, remainder=None, degenerate=True)
    remainder = StateVector(psi.factors, rest / rest_norm, psi.frames)
    return ReductionResult(a1=a1, phase=phase, remainder=remainder)


def lagrange_residual(
    law: ProbabilityLaw,
    a: Sequence[float],
    fd_step: float = DEFAULT_FD_STEP,
) -> LagrangeReport:
    """
    Central-difference estimate of (1/a(k))·∂P_k/∂a(k) for every k.

    Components with a(k) < 10·fd_step are skipped (the quotient is singular
    at a(k) = 0).
    """
    values: list[float | None] = []
    skipped = []
    for k, ak in enumerate(a, start=1):
        ak = float(ak)
        if ak < 10 * fd_step:
            values.append(None)
            skipped.append(k)
            continue
        upper = float(law.evaluate(k, (ak + fd_step) ** 2))
        lower = float(law.evaluate(k, (ak - fd_step) ** 2))
        values.append((upper - lower) / (2 * fd_step) / ak)

    n = len(values)
    residuals = np.full((n, n), np.nan)
    for i in range(n):
        for j in range(n):
            vi, vj = values[i], values[j]
            if vi is not None and vj is not None:
                residuals[i, j] = vi - vj
    finite = residuals[np.isfinite(residuals)]
    max_residual = float(np.max(np.abs(finite))) if finite.size else 0.0
    return LagrangeReport(values, skipped, residuals, max_residual)


def lambda_spread(
    law: ProbabilityLaw,
    points: Sequence[Sequence[float]],
    fd_step: float = DEFAULT_FD_STEP,
) -> float:
    """
    Spread (max − min) of the Lagrange values across several amplitude
    points. Zero for a law whose λ is independent of the amplitudes.
    """
    collected = []
    for point in points:
        report = lagrange_residual(law, point, fd_step)
        collected.extend(v for v in report.values if v is not None)
    if not collected:
        return 0.0
    return float(max(collected) - min(collected))


def compose_auxiliary(
    law: ProbabilityLaw,
    a: Sequence[complex],
    b: Sequence[Sequence[complex]],
) -> CompositionReport:
    """
    Follow each outcome k of a first experiment with a second experiment
    whose amplitudes b(k, ·) depend on k, and compare the law applied to the
    composed system with the product rule.

    The composed system is one experiment whose outcomes (k, j) are numbered
    1, 2, ... in order of k then j; the joint law is evaluated at that index,
    the first at k and the conditional at j.
    """
    if len(b) != len(a):
        raise StateError("One auxiliary amplitude list is needed per first outcome")
    _check_normalized(a, "First-experiment amplitudes")
    for k, bk in enumerate(b, start=1):
        _check_normalized(bk, f"Auxiliary amplitudes for k={k}")

    pairs = [(k, j) for k, bk in enumerate(b, start=1) for j in range(1, len(bk) + 1)]
    system = Factor("system", tuple(range(1, len(a) + 1)))
    auxiliary = Factor("auxiliary", tuple((j, k) for k, j in pairs))
    amps = np.zeros((system.dim, auxiliary.dim), dtype=np.complex128)
    for col, (k, j) in enumerate(pairs):
        amps[k - 1, col] = complex(a[k - 1]) * complex(b[k - 1][j - 1])
    composed = StateVector((system, auxiliary), amps)

    violations = {}
    for col, (k, j) in enumerate(pairs):
        x = abs(complex(a[k - 1])) ** 2
        y = abs(complex(b[k - 1][j - 1])) ** 2
        joint = float(law.evaluate(col + 1, abs(amps[k - 1, col]) ** 2))
        product = float(law.evaluate(k, x)) * float(law.evaluate(j, y))
        violations[(k, j)] = abs(joint - product)
    worst = max(violations.values(), default=0.0)
    logger.debug(f"compose_auxiliary({law.identifier}): max violation {worst:.3e}")
    return CompositionReport(violations, worst, composed)


@dataclass(frozen=True)
class GeneralAffineFamily:
    """The family P_k(x) = (λ/2)x + c(k) over n outcomes."""
    n: int


def default_probes(n: int) -> list[Probe]:
    """Four |a(k)|² values and five |b|² values for every outcome."""
    xs = (0.2, 0.4, 0.6, 0.8)
    ys = (0.1, 0.3, 0.5, 0.7, 0.9)
    return [Probe(k, x, ys) for k in range(1, n + 1) for x in xs]


def derive_born(
    family: GeneralAffineFamily,
    probes: Sequence[Probe],
    noise: float = 0.0,
    rng_seed: int | None = None,
) -> BornDerivation:
    """
    Solve for (λ, c(k)) from the composition conditions.

    With every member of the family written as (λ/2)·weight + offset and one
    λ shared by the first, composed and conditional experiments, the product
    rule P_{1+2,k,j} = P_k·P_{2,j given k} differentiated with respect to
    y = |b(k,j)|² reads (λ/2)·∂w/∂y = P_k(x)·(λ/2), where w = |a(k)b(k,j)|² is
    the composed weight. For λ ≠ 0 that is one linear row per probe:

        (λ/2)·x + c(k) = ∂w/∂y

    The slope ∂w/∂y is measured by a straight-line fit of the probe's
    composed weights against its y values; `noise` perturbs those measured
    weights with a Gaussian of that standard deviation.
    """
    if not probes:
        raise LawError("derive_born needs probes")
    for k in range(1, family.n + 1):
        ys = {y for p in probes if p.k == k for y in p.y_values}
        if len(ys) < 2:
            raise LawError(f"Degenerate probe set: fewer than two |b|² values for k={k}")
    rng = np.random.default_rng(rng_seed)

    rows, rhs = [], []
    for probe in probes:
        if not 1 <= probe.k <= family.n:
            raise LawError(f"Probe outcome {probe.k} outside 1..{family.n}")
        ys = np.asarray(sorted(set(probe.y_values)), dtype=float)
        if ys.size < 2:
            raise LawError(f"Probe k={probe.k}, x={probe.x} needs two distinct |b|² values")
        composed = probe.x * ys
        if noise:
            composed = composed + rng.normal(0.0, noise, ys.size)
        slope = float(np.polyfit(ys, composed, 1)[0])
        row = np.zeros(1 + family.n)
        row[0] = probe.x / 2
        row[probe.k] = 1.0
        rows.append(row)
        rhs.append(slope)

    matrix = np.asarray(rows)
    solution, residual, rank, _ = np.linalg.lstsq(matrix, np.asarray(rhs), rcond=None)
    if rank < 1 + family.n:
        raise LawError(f"Degenerate probe set: rank {rank} < {1 + family.n}")
    residual_norm = float(np.sqrt(residual[0])) if residual.size else 0.0
    logger.debug(f"derive_born(n={family.n}): λ={solution[0]:.12g}, residual {residual_norm:.3e}")
    return BornDerivation(
        lam=float(solution[0]),
        offsets=[float(c) for c in solution[1:]],
        rank=int(rank),
        residual=residual_norm,
    )
