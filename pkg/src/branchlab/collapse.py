"""
Collapse models: why linear evolution cannot collapse, and a nonlinear
surrogate that does.

Linear part: a family of (possibly non-unitary) operators T(t) that respect
the branch decomposition rescales each branch by β(k, t). The collapse
weights X(k, t) = |β(k,t)|² / Σ_j |β(j,t)|² are then functions of T alone,
so averaging them over runs cannot reproduce |a(k)|² for every a.

Stochastic part: a replicator-noise martingale on the simplex,
dx_k = σ·x_k·(dW_k − Σ_j x_j dW_j), which absorbs at a vertex with
probability equal to the initial weight. This is a surrogate, not GRW.
"""

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .seeding import rng_for
from .tensorcore import Factor, LinearOperator, OperatorKind, random_unitary
from .types import CollapseError

logger = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-10
ABSORPTION_THRESHOLD = 1.0 - 1e-6
CHUNK_SIZE = 1000
MIN_STATISTICS_RUNS = 100


# Linear evolution


def branch_factors(n: int, d: int) -> tuple[Factor, Factor]:
    """System factor 1..n and an internal factor 0..d-1 per branch."""
    return Factor("system", tuple(range(1, n + 1))), Factor("internal", tuple(range(d)))


@dataclass(frozen=True, eq=False)
class LinearEvolutionFamily:
    """
    Operators T_m(t) on the branch space, one sequence per run.

    Branch k is the vector |k⟩|internal=0⟩, standing for |k⟩|D:k,yes⟩. Each
    operator must be block diagonal in k. Run m uses sequence m modulo the
    number of sequences.
    """
    times: tuple[float, ...]
    operators: tuple[tuple[LinearOperator, ...], ...]

    def __post_init__(self) -> None:
        if not self.operators or not self.operators[0]:
            raise CollapseError("LinearEvolutionFamily needs at least one operator")
        for run in self.operators:
            if len(run) != len(self.times):
                raise CollapseError("One operator is needed per time in every run")
            for opr in run:
                self._check_blocks(opr)

    @property
    def n(self) -> int:
        return self.operators[0][0].factors[0].dim

    @property
    def d(self) -> int:
        return self.operators[0][0].factors[1].dim

    def _check_blocks(self, opr: LinearOperator) -> None:
        n, d = opr.factors[0].dim, opr.factors[1].dim
        blocks = opr.matrix.reshape(n, d, n, d)
        for j in range(n):
            for k in range(n):
                if j != k and np.any(blocks[j, :, k, :] != 0):
                    raise CollapseError(
                        f"Operator couples branches {j + 1} and {k + 1}; "
                        "T must act within branch subspaces"
                    )

    def run_operators(self, run: int) -> tuple[LinearOperator, ...]:
        return self.operators[run % len(self.operators)]

    @classmethod
    def from_blocks(cls, times: Sequence[float], blocks: np.ndarray) -> "LinearEvolutionFamily":
        """Build from an array of shape (runs, steps, n, d, d)."""
        blocks = np.asarray(blocks, dtype=np.complex128)
        if blocks.ndim != 5:
            raise CollapseError("blocks must have shape (runs, steps, n, d, d)")
        runs, steps, n, d, _ = blocks.shape
        factors = branch_factors(n, d)
        operators = []
        for r in range(runs):
            sequence = []
            for s in range(steps):
                matrix = np.zeros((n * d, n * d), dtype=np.complex128)
                for k in range(n):
                    matrix[k * d:(k + 1) * d, k * d:(k + 1) * d] = blocks[r, s, k]
                sequence.append(LinearOperator(factors, matrix, OperatorKind.GENERAL))
            operators.append(tuple(sequence))
        return cls(tuple(float(t) for t in times), tuple(operators))


def random_linear_family(
    n: int,
    steps: int,
    rng: np.random.Generator,
    d: int = 2,
    unitary: bool = False,
    diagonal: bool = False,
    runs: int = 1,
) -> LinearEvolutionFamily:
    """
    Random block-respecting family with T(0) = I.

    Non-unitary blocks are complex Gaussian matrices; `diagonal` keeps only
    their diagonals.
    """
    blocks = np.zeros((runs, steps, n, d, d), dtype=np.complex128)
    for r in range(runs):
        blocks[r, 0] = np.eye(d)
        for s in range(1, steps):
            for k in range(n):
                if unitary:
                    block = random_unitary(d, rng)
                else:
                    block = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
                    if diagonal:
                        block = np.diag(np.diag(block))
                blocks[r, s, k] = block
    times = np.linspace(0.0, 1.0, steps) if steps > 1 else np.zeros(1)
    return LinearEvolutionFamily.from_blocks(times, blocks)


@dataclass
class CollapseTrajectory:
    """Collapse weights X(k, t) over time, with linear-evolution or stochastic provenance."""
    times: np.ndarray
    X: np.ndarray
    beta: np.ndarray | None = None
    coefficient_residual: float | None = None
    outcome: int | None = None
    unresolved: bool = False
    projections: int = 0

    @property
    def n(self) -> int:
        return int(self.X.shape[1])

    def to_frame(self) -> pd.DataFrame:
        """CSV layout: time, x_1 .. x_n."""
        frame = pd.DataFrame(self.X, columns=[f"x_{k}" for k in range(1, self.n + 1)])
        frame.insert(0, "time", self.times)
        return frame


def _check_amplitudes(a: Sequence[complex]) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 1 or a.size == 0:
        raise CollapseError("Amplitudes must be a non-empty list")
    total = float(np.sum(np.abs(a) ** 2))
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise CollapseError(f"Amplitudes are not normalised: Σ|a|² = {total!r}")
    return a


def linear_X(fam: LinearEvolutionFamily, a: Sequence[complex], run: int = 0) -> CollapseTrajectory:
    """
    Extract β(k, t) and X(k, t) for one run.

    β comes from T applied to each basis branch vector, never to Ψ(0), so X
    is bitwise the same for every a. The supplied a is used only to certify
    T·Ψ(0) = Σ_k a(k)β(k,t)|k,t⟩ (coefficient_residual).
    """
    a = _check_amplitudes(a)
    if a.size != fam.n:
        raise CollapseError(f"Expected {fam.n} amplitudes, got {a.size}")
    n, d = fam.n, fam.d
    operators = fam.run_operators(run)
    betas = np.zeros((len(operators), n))
    residual = 0.0
    psi0 = np.zeros(n * d, dtype=np.complex128)
    psi0[::d] = a
    for step, opr in enumerate(operators):
        images = opr.matrix[:, ::d]  # column k-1: T|k⟩|0⟩
        norms = np.linalg.norm(images, axis=0)
        if not np.any(norms > 0):
            raise CollapseError(f"T annihilates every branch at t={fam.times[step]}")
        betas[step] = norms
        recomposed = np.zeros(n * d, dtype=np.complex128)
        for k in range(n):
            if norms[k] > 0:
                recomposed += a[k] * norms[k] * (images[:, k] / norms[k])
        residual = max(residual, float(np.linalg.norm(opr.matrix @ psi0 - recomposed)))
    weights = betas**2
    X = weights / weights.sum(axis=1, keepdims=True)
    return CollapseTrajectory(
        times=np.asarray(fam.times), X=X, beta=betas, coefficient_residual=residual
    )


@dataclass
class CertificateReport:
    """Run-averaged X for several amplitude lists, against their Born profiles."""
    a_set: list[list[complex]]
    averages: np.ndarray          # (len(a_set), steps, n)
    born: np.ndarray              # (len(a_set), n)
    identical_across_a: bool
    vacuous: bool
    max_deviation: float

    @property
    def contradiction(self) -> bool:
        """Equal averages with distinct Born profiles: the Born average fails for some a."""
        if self.vacuous or not self.identical_across_a:
            return False
        return bool(np.max(np.ptp(self.born, axis=0)) > 0)


def born_violation_certificate(
    fam: LinearEvolutionFamily,
    a_set: Sequence[Sequence[complex]],
    runs: int,
) -> CertificateReport:
    """(1/N)Σ_m X_m(k, t) for each a in a_set over `runs` runs."""
    if runs < 1:
        raise CollapseError("born_violation_certificate needs at least one run")
    amplitude_lists = [_check_amplitudes(a) for a in a_set]
    distinct = {tuple(np.round(np.abs(a) ** 2, 15)) for a in amplitude_lists}
    averages = []
    for a in amplitude_lists:
        total = sum(linear_X(fam, a, m).X for m in range(runs))
        averages.append(np.asarray(total) / runs)
    stacked = np.asarray(averages)
    born = np.asarray([np.abs(a) ** 2 for a in amplitude_lists])
    identical = all(np.array_equal(stacked[0], other) for other in stacked[1:])
    deviation = float(np.max(np.abs(stacked[:, -1, :] - born))) if len(stacked) else 0.0
    vacuous = len(distinct) < 2
    if vacuous:
        logger.warning("born_violation_certificate: fewer than two distinct amplitude lists")
    return CertificateReport(
        a_set=[list(a) for a in amplitude_lists],
        averages=stacked,
        born=born,
        identical_across_a=identical,
        vacuous=vacuous,
        max_deviation=deviation,
    )


# Stochastic surrogate


@dataclass(frozen=True)
class CollapseParams:
    sigma: float = 1.0
    dt: float = 1e-3
    max_steps: int = 1_000_000

    def __post_init__(self) -> None:
        if self.sigma <= 0 or self.dt <= 0:
            raise CollapseError(f"sigma and dt must be positive, got {self.sigma}, {self.dt}")
        if self.max_steps < 1:
            raise CollapseError("max_steps must be at least 1")


@dataclass
class BatchResult:
    """Outcomes of a batch of stochastic runs; outcome 0 means unresolved."""
    outcomes: np.ndarray
    steps: np.ndarray
    projections: int
    total_steps: int
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


def _step(
    x: np.ndarray, sigma: float, dt: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """One Euler-Maruyama step on rows of x; returns new x and a per-row clip mask."""
    dw = rng.normal(0.0, math.sqrt(dt), size=x.shape)
    mean_dw = np.sum(x * dw, axis=1, keepdims=True)
    x = x + sigma * x * (dw - mean_dw)
    clipped = np.any(x < 0, axis=1)
    x = np.clip(x, 0.0, None)
    x = x / x.sum(axis=1, keepdims=True)
    return x, clipped


def simulate_collapse_batch(
    x0: Sequence[float],
    runs: int,
    params: CollapseParams,
    rng: np.random.Generator,
    snapshot_steps: Sequence[int] = (),
) -> BatchResult:
    """
    Evolve `runs` independent copies of the martingale from x0 in lockstep.

    Absorbed runs are frozen; snapshot means are taken over all runs,
    absorbed ones at their frozen values.
    """
    x = np.tile(np.asarray(x0, dtype=float), (runs, 1))
    outcomes = np.zeros(runs, dtype=int)
    steps = np.zeros(runs, dtype=int)
    projections = 0
    total_steps = 0
    snapshots: dict[int, np.ndarray] = {}
    wanted = set(snapshot_steps)

    active = np.ones(runs, dtype=bool)
    for step in range(params.max_steps + 1):
        if step in wanted:
            snapshots[step] = x.mean(axis=0)
        done = active & (x.max(axis=1) > ABSORPTION_THRESHOLD)
        if np.any(done):
            outcomes[done] = np.argmax(x[done], axis=1) + 1
            steps[done] = step
            active &= ~done
        if not np.any(active) or step == params.max_steps:
            break
        idx = np.flatnonzero(active)
        x[idx], clipped = _step(x[idx], params.sigma, params.dt, rng)
        projections += int(np.count_nonzero(clipped))
        total_steps += idx.size

    steps[active] = params.max_steps
    for step in wanted - snapshots.keys():
        snapshots[step] = x.mean(axis=0)
    logger.debug(
        f"Collapse batch: {runs} runs, {total_steps} steps, {projections} projections, "
        f"{int(np.count_nonzero(active))} unresolved"
    )
    return BatchResult(outcomes, steps, projections, total_steps, snapshots)


def stochastic_collapse_run(
    a: Sequence[complex],
    sigma: float = 1.0,
    dt: float = 1e-3,
    max_steps: int = 1_000_000,
    seed: int = 0,
    record_every: int = 1,
) -> CollapseTrajectory:
    """A single recorded trajectory of the martingale collapse surrogate."""
    params = CollapseParams(sigma, dt, max_steps)
    a = _check_amplitudes(a)
    rng = np.random.default_rng(seed)
    x = (np.abs(a) ** 2)[None, :]
    times, history = [0.0], [x[0].copy()]
    projections = 0
    outcome = None
    step = last_recorded = 0
    while True:
        if x.max() > ABSORPTION_THRESHOLD:
            outcome = int(np.argmax(x[0])) + 1
            break
        if step == params.max_steps:
            break
        x, clipped = _step(x, params.sigma, params.dt, rng)
        step += 1
        projections += int(clipped[0])
        if step % record_every == 0:
            times.append(step * params.dt)
            history.append(x[0].copy())
            last_recorded = step
    if last_recorded != step:
        times.append(step * params.dt)
        history.append(x[0].copy())
    if outcome is None:
        logger.warning(f"Collapse run did not resolve within {params.max_steps} steps")
    return CollapseTrajectory(
        times=np.asarray(times),
        X=np.asarray(history),
        outcome=outcome,
        unresolved=outcome is None,
        projections=projections,
    )


@dataclass
class CollapseStatistics:
    """Outcome frequencies of many stochastic runs against |a(k)|²."""
    expected: np.ndarray
    counts: np.ndarray
    runs: int
    unresolved: int
    projection_fraction: float
    snapshot_means: dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.runs

    @property
    def stderr(self) -> np.ndarray:
        p = self.expected
        return np.sqrt(p * (1 - p) / self.runs)

    @property
    def within_3_sigma(self) -> bool:
        deviation = np.abs(self.frequencies - self.expected)
        return bool(np.all(deviation <= 3 * self.stderr + 1e-15))

    def to_frame(self) -> pd.DataFrame:
        k = np.arange(1, self.expected.size + 1)
        return pd.DataFrame({
            "k": k,
            "expected": self.expected,
            "count": self.counts,
            "frequency": self.frequencies,
            "stderr": self.stderr,
        })


def collapse_statistics(
    a: Sequence[complex],
    runs: int,
    params: CollapseParams | None = None,
    seed: int = 0,
    serial: bool = True,
    snapshot_steps: Sequence[int] = (),
) -> CollapseStatistics:
    """
    Run the surrogate `runs` times and tabulate outcome frequencies.

    Runs are split into fixed-size chunks; chunk c draws from
    derive_seed(seed, c), so results are the same serial or threaded.
    """
    if runs < MIN_STATISTICS_RUNS:
        raise CollapseError(f"collapse_statistics needs at least {MIN_STATISTICS_RUNS} runs")
    params = params or CollapseParams()
    a = _check_amplitudes(a)
    x0 = np.abs(a) ** 2
    sizes = [min(CHUNK_SIZE, runs - start) for start in range(0, runs, CHUNK_SIZE)]

    def run_chunk(index: int) -> BatchResult:
        rng = rng_for(seed, index)
        return simulate_collapse_batch(x0, sizes[index], params, rng, snapshot_steps)

    if serial:
        results = [run_chunk(i) for i in range(len(sizes))]
    else:
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(run_chunk, range(len(sizes))))

    outcomes = np.concatenate([r.outcomes for r in results])
    counts = np.array([np.count_nonzero(outcomes == k) for k in range(1, x0.size + 1)])
    unresolved = int(np.count_nonzero(outcomes == 0))
    total_steps = sum(r.total_steps for r in results)
    projections = sum(r.projections for r in results)
    snapshot_means = {
        step: sum(r.snapshots[step] * size for r, size in zip(results, sizes, strict=True)) / runs
        for step in snapshot_steps
        if all(step in r.snapshots for r in results)
    }
    if unresolved:
        logger.warning(f"{unresolved} of {runs} collapse runs unresolved at max_steps")
    return CollapseStatistics(
        expected=x0,
        counts=counts,
        runs=runs,
        unresolved=unresolved,
        projection_fraction=projections / total_steps if total_steps else 0.0,
        snapshot_means=snapshot_means,
    )
