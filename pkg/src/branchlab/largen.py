"""
Probability in the large: branch classes of N repeated two-outcome runs.

After N runs with |a(1)|² = p, the 2^N branches group into classes by the
number n of outcome-1 results. Class n holds C(N, n) branches, each of
squared amplitude p^n(1-p)^(N-n). Everything is done in log space (N = 10,000
overflows doubles by thousands of orders of magnitude) with exact integer and
Fraction paths for checking.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import pandas as pd
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

from .bornlaw import LawKind, ProbabilityLaw
from .seeding import rng_for
from .types import LawError

logger = logging.getLogger(__name__)

MAX_EXACT_N = 20_000
MAX_VERSIONS_N = 100_000
STR_CHUNK_DIGITS = 1000
NORMALIZATION_CONVENTION = "weight(n) = C(N,n)*law(x_n) normalised by its total over n"
LN10 = math.log(10.0)


@dataclass
class BranchClass:
    """All branches with n outcome-1 results out of N."""
    N: int
    n: int
    count: int
    log10_count: float
    log_amp2: float


@dataclass
class MacroDistribution:
    """Normalised weight over n ∈ [0, N] induced by a micro-law."""
    N: int
    p: float
    law_id: str
    log_weights: np.ndarray
    log_normalization: float
    convention: str = NORMALIZATION_CONVENTION

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def mode(self) -> int:
        return int(np.argmax(self.log_weights))

    @property
    def mean(self) -> float:
        n = np.arange(self.N + 1)
        return float(np.sum(n * self.weights))

    @property
    def sigma(self) -> float:
        n = np.arange(self.N + 1)
        return float(np.sqrt(np.sum((n - self.mean) ** 2 * self.weights)))


@dataclass
class RunByRunReport:
    """Per-run perception frequency against the end-of-N macro mode."""
    law_id: str
    N: int
    p: float
    runs: int
    per_run_probability: float
    outcomes: list[int] = field(default_factory=list)
    macro_mode: int | None = None

    @property
    def frequency(self) -> float | None:
        if not self.outcomes:
            return None
        return sum(1 for o in self.outcomes if o == 1) / len(self.outcomes)

    @property
    def stderr(self) -> float | None:
        if not self.outcomes:
            return None
        q = self.per_run_probability
        return math.sqrt(q * (1 - q) / len(self.outcomes))

    @property
    def macro_fraction(self) -> float | None:
        return None if self.macro_mode is None else self.macro_mode / self.N

    @property
    def discrepant(self) -> bool:
        """Per-run frequency and macro mode/N differ by more than 3 standard errors."""
        freq, err, macro = self.frequency, self.stderr, self.macro_fraction
        if freq is None or macro is None or err is None:
            return False
        return abs(freq - macro) > 3 * max(err, 1e-300)


def big_int_str(value: int) -> str:
    """
    Decimal text of an arbitrarily large int.

    Converted in chunks of STR_CHUNK_DIGITS, each below the interpreter's
    int→str digit limit, so the process-wide limit is never touched.
    """
    if value < 0:
        return "-" + big_int_str(-value)
    base = 10**STR_CHUNK_DIGITS
    chunks = []
    while value >= base:
        value, chunk = divmod(value, base)
        chunks.append(str(chunk).zfill(STR_CHUNK_DIGITS))
    chunks.append(str(value))
    return "".join(reversed(chunks))


def _validate(N: int, n: int | None = None, p: float | None = None) -> None:
    if N < 0:
        raise LawError(f"N must be non-negative, got {N}")
    if n is not None and not 0 <= n <= N:
        raise LawError(f"n must lie in [0, {N}], got {n}")
    if p is not None and not 0.0 <= p <= 1.0:
        raise LawError(f"p must lie in [0, 1], got {p}")


def _log_binomial(N: int, n: np.ndarray | int) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return np.asarray(gammaln(N + 1) - gammaln(n + 1) - gammaln(N - n + 1))


def _log_branch_x(N: int, n: np.ndarray | int, p: float) -> np.ndarray:
    """log of p^n (1-p)^(N-n); exact -inf / 0 at the degenerate p ∈ {0, 1}."""
    n = np.asarray(n, dtype=float)
    return np.asarray(xlogy(n, p) + xlog1py(N - n, -p))


def branch_class_amplitude(N: int, n: int, p: float) -> float:
    """log |A(n)|² = log C(N,n) + n·log p + (N−n)·log(1−p)."""
    _validate(N, n, p)
    return float(_log_binomial(N, n) + _log_branch_x(N, n, p))


def branch_class_weight_exact(N: int, n: int, p: Fraction | float | str) -> Fraction:
    """|A(n)|² as an exact rational, for N ≤ 20,000."""
    _validate(N, n)
    if N > MAX_EXACT_N:
        raise LawError(f"Exact path limited to N ≤ {MAX_EXACT_N}, got {N}")
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise LawError(f"p must lie in [0, 1], got {p}")
    return math.comb(N, n) * p**n * (1 - p) ** (N - n)


def branch_class(N: int, n: int, p: float) -> BranchClass:
    _validate(N, n, p)
    count = math.comb(N, n)
    return BranchClass(
        N=N,
        n=n,
        count=count,
        log10_count=math.log10(count),
        log_amp2=branch_class_amplitude(N, n, p),
    )


def branch_classes(N: int, p: float) -> pd.DataFrame:
    """
    Table of every branch class: n, log10_count, log10_amp2, weight.

    The weight column is the Born weight |A(n)|², which sums to one.
    """
    _validate(N, p=p)
    n = np.arange(N + 1)
    log_count = _log_binomial(N, n)
    log_amp2 = log_count + _log_branch_x(N, n, p)
    return pd.DataFrame({
        "n": n,
        "log10_count": log_count / LN10,
        "log10_amp2": log_amp2 / LN10,
        "weight": np.exp(log_amp2),
    })


def pascal_row(N: int) -> list[int]:
    """Row N of Pascal's triangle by the additive rule (slow oracle)."""
    _validate(N)
    row = [1]
    for _ in range(N):
        row = [a + b for a, b in zip([0, *row], [*row, 0], strict=True)]
    return row


def branch_count_ratio(N: int, n1: int, n2: int) -> float:
    """log10[C(N,n1) / C(N,n2)] from the exact integer binomials."""
    _validate(N, n1)
    _validate(N, n2)
    if n1 == n2:
        return 0.0
    return math.log10(math.comb(N, n1)) - math.log10(math.comb(N, n2))


def versions_count(N: int) -> int:
    """2^N, the number of observer versions after N two-outcome runs."""
    _validate(N)
    if N > MAX_VERSIONS_N:
        raise LawError(f"versions_count limited to N ≤ {MAX_VERSIONS_N}, got {N}")
    return 1 << N


def decimal_digits(value: int) -> int:
    return len(big_int_str(abs(value)))


def induced_macro_distribution(law: ProbabilityLaw, N: int, p: float) -> MacroDistribution:
    """
    Apply a micro-law to every branch and sum within classes.

    weight(n) ∝ C(N,n)·law(x_n) with x_n = p^n(1−p)^(N−n), normalised over n.

    All C(N,n) branches of a class share one law value, so the law must not
    depend on the outcome index: general affine laws need a single offset.
    """
    _validate(N, p=p)
    if law.kind is LawKind.GENERAL_AFFINE and len(set(law.params["offsets"])) > 1:
        raise LawError(
            f"Law {law.identifier} has outcome-dependent offsets; branch classes need one"
        )
    n = np.arange(N + 1)
    log_x = _log_branch_x(N, n, p)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_weight = _log_binomial(N, n) + law.log_evaluate(1, log_x)
    log_weight = np.where(np.isnan(log_weight), -np.inf, log_weight)
    total = float(logsumexp(log_weight))
    if not np.isfinite(total):
        raise LawError(f"Law {law.identifier} gives zero total weight at N={N}, p={p}")
    logger.debug(f"Macro distribution {law.identifier} N={N} p={p}: log total {total:.3e}")
    return MacroDistribution(
        N=N,
        p=p,
        law_id=law.identifier,
        log_weights=log_weight - total,
        log_normalization=total,
    )


def mode_and_width(d: MacroDistribution) -> tuple[int, float]:
    return d.mode, d.sigma


def quadratic_term_log_mass(law: ProbabilityLaw, N: int, p: float) -> tuple[float, float]:
    """
    Unnormalised mass of the β·x² term of an affine_quadratic law, summed over
    all 2^N branches: (numerical log-sum, closed form log β + N·log(p²+(1−p)²)).
    """
    if law.kind is not LawKind.AFFINE_QUADRATIC:
        raise LawError("quadratic_term_log_mass needs an affine_quadratic law")
    _validate(N, p=p)
    beta = law.params["beta"]
    if beta == 0:
        return -math.inf, -math.inf
    n = np.arange(N + 1)
    numeric = float(logsumexp(_log_binomial(N, n) + math.log(beta) + 2 * _log_branch_x(N, n, p)))
    closed = math.log(beta) + N * math.log(p * p + (1 - p) ** 2)
    return numeric, closed


def per_run_probability(law: ProbabilityLaw, p: float) -> float:
    """law(p) / (law(p) + law(1−p)) for a two-outcome run."""
    first = float(law.evaluate(1, p))
    second = float(law.evaluate(2, 1.0 - p))
    total = first + second
    if total <= 0:
        raise LawError(f"Law {law.identifier} gives zero total weight at p={p}")
    return first / total


def run_by_run_experiment(
    law: ProbabilityLaw,
    N: int,
    p: float,
    runs: int,
    seed: int,
) -> RunByRunReport:
    """
    Simulate per-run perception under a micro-law and compare it with the
    mode of the end-of-N macro distribution. Run m draws from
    derive_seed(seed, m).
    """
    _validate(N, p=p)
    q = per_run_probability(law, p)
    report = RunByRunReport(law_id=law.identifier, N=N, p=p, runs=runs, per_run_probability=q)
    if runs == 0:
        logger.warning("run_by_run_experiment called with runs=0; empty report")
        return report
    report.outcomes = [1 if rng_for(seed, m).random() < q else 2 for m in range(runs)]
    report.macro_mode = induced_macro_distribution(law, N, p).mode
    logger.info(
        f"Run-by-run {law.identifier}: frequency {report.frequency:.5f}, "
        f"per-run probability {q:.5f}, macro mode/N {report.macro_fraction}"
    )
    return report
