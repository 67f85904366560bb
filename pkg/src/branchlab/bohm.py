"""
One-dimensional guided trajectories in a two-branch wave packet.

ψ(x,t) = a1·ψ1 + a2·ψ2 where each ψk is a free Gaussian of initial width w,
centre x0_k and group velocity v_k (units ħ = m = 1). Trajectories follow
dx/dt = Im(∂ψ/∂x / ψ). Everything is evaluated from the closed form in log
space, so tails far from either packet stay finite.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid, solve_ivp, trapezoid
from scipy.optimize import brentq
from scipy.stats import chisquare

from .seeding import rng_for
from .types import NodalRegionError, StateError

logger = logging.getLogger(__name__)

NODAL_FLOOR = 1e-30
OVERLAP_THRESHOLD = 1e-10
NORMALIZATION_TOL = 1e-10
RTOL = 1e-8
ATOL = 1e-8
GRID_POINTS = 20001
GRID_HALF_WIDTHS = 12.0
SAMPLE_CHUNK = 1000

_LOG_NORM = -0.25 * math.log(2 * math.pi)
_LOG_FLOOR = math.log(NODAL_FLOOR)


@dataclass(frozen=True)
class PacketPair:
    """Two free Gaussian branches with amplitudes a1, a2."""
    a1: complex = math.sqrt(0.9)
    a2: complex = math.sqrt(0.1)
    centres: tuple[float, float] = (-2.0, 2.0)
    velocities: tuple[float, float] = (-2.0, 2.0)
    width: float = 2.0

    def __post_init__(self) -> None:
        total = abs(self.a1) ** 2 + abs(self.a2) ** 2
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise StateError(f"Branch amplitudes are not normalised: {total!r}")
        if self.width <= 0:
            raise StateError(f"Packet width must be positive, got {self.width}")

    @property
    def weights(self) -> tuple[float, float]:
        return abs(self.a1) ** 2, abs(self.a2) ** 2

    def centre(self, k: int, t: float) -> float:
        return self.centres[k - 1] + self.velocities[k - 1] * t

    def spread(self, t: float) -> float:
        """Position standard deviation of either branch at time t."""
        w = self.width
        return w * math.sqrt(1.0 + (t / (2 * w * w)) ** 2)

    def overlap(self, t: float) -> float:
        """∫|ψ1||ψ2| dx for the unit-normalised branches."""
        gap = self.centre(2, t) - self.centre(1, t)
        return math.exp(-gap * gap / (8 * self.spread(t) ** 2))

    def shifted(self, delta: float) -> "PacketPair":
        """The same pair with the device displaced by delta."""
        return replace(self, centres=(self.centres[0] + delta, self.centres[1] + delta))

    def grid(self, t: float, points: int = GRID_POINTS) -> np.ndarray:
        reach = GRID_HALF_WIDTHS * self.spread(t)
        lo = min(self.centre(1, t), self.centre(2, t)) - reach
        hi = max(self.centre(1, t), self.centre(2, t)) + reach
        return np.linspace(lo, hi, points)


def packet_pair(p1: float = 0.9, **kwargs: object) -> PacketPair:
    """Pair with real amplitudes √p1, √(1−p1)."""
    if not 0.0 <= p1 <= 1.0:
        raise StateError(f"Branch weight must lie in [0, 1], got {p1}")
    return PacketPair(math.sqrt(p1), math.sqrt(1.0 - p1), **kwargs)  # type: ignore[arg-type]


def _branch_logs(p: PacketPair, x: np.ndarray, t: float) -> list[tuple[np.ndarray, np.ndarray]]:
    """(log(a_k ψ_k), ∂ log ψ_k/∂x) for each populated branch."""
    w = p.width
    alpha = w * w + 0.5j * t
    terms = []
    for k, a in ((1, p.a1), (2, p.a2)):
        if a == 0:
            continue
        x0, v = p.centres[k - 1], p.velocities[k - 1]
        c = x0 + v * t
        log_psi = (
            np.log(complex(a)) + _LOG_NORM + 0.5 * math.log(w) - 0.5 * np.log(alpha)
            - (x - c) ** 2 / (4 * alpha) + 1j * v * (x - x0) - 0.5j * v * v * t
        )
        dlog = -(x - c) / (2 * alpha) + 1j * v
        terms.append((log_psi, dlog))
    return terms


def _field(p: PacketPair, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Guidance velocity and log|ψ| at positions x."""
    terms = _branch_logs(p, x, t)
    shift = np.max([lp.real for lp, _ in terms], axis=0)
    scaled = [np.exp(lp - shift) for lp, _ in terms]
    psi = sum(scaled)
    dpsi = sum(s * d for s, (_, d) in zip(scaled, terms, strict=True))
    with np.errstate(divide="ignore", invalid="ignore"):
        log_abs = shift + np.log(np.abs(psi))
        velocity = np.imag(dpsi / psi)
    return np.asarray(velocity), np.asarray(log_abs)


def wavefunction(p: PacketPair, x: Sequence[float] | np.ndarray, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.asarray(sum(np.exp(lp) for lp, _ in _branch_logs(p, x, t)))


def density(p: PacketPair, x: Sequence[float] | np.ndarray, t: float) -> np.ndarray:
    """|ψ(x,t)|²."""
    x = np.asarray(x, dtype=float)
    _, log_abs = _field(p, x, t)
    return np.exp(2 * log_abs)


def norm(p: PacketPair, t: float = 0.0) -> float:
    """∫|ψ(x,t)|² dx by trapezoidal quadrature."""
    grid = p.grid(t)
    return float(trapezoid(density(p, grid, t), grid))


def guidance_velocity(p: PacketPair, x: float, t: float) -> float:
    velocity, log_abs = _field(p, np.asarray([x], dtype=float), t)
    if not log_abs[0] > _LOG_FLOOR:
        raise NodalRegionError(f"|ψ| below {NODAL_FLOOR} at x={x}, t={t}")
    return float(velocity[0])


def separation_time(p: PacketPair, threshold: float = OVERLAP_THRESHOLD) -> float:
    """First time the branch overlap drops below threshold; inf if it never does."""
    if p.overlap(0.0) < threshold:
        return 0.0
    upper = 1.0
    while p.overlap(upper) >= threshold:
        upper *= 2
        if upper > 1e6:
            logger.warning("Packets never separate below the overlap threshold")
            return math.inf
    return float(brentq(lambda t: p.overlap(t) - threshold, 0.0, upper, xtol=1e-12))


def _assign(p: PacketPair, x: np.ndarray, t: float) -> np.ndarray:
    """1 or 2 by proximity to the branch centres at time t."""
    nearer_first = np.abs(x - p.centre(1, t)) <= np.abs(x - p.centre(2, t))
    return np.where(nearer_first, 1, 2)


@dataclass
class Trajectory:
    """Sampled positions of one guided particle; assignment None when unresolved."""
    times: np.ndarray
    positions: np.ndarray
    assignment: int | None = None
    diagnostics: str = ""

    @property
    def resolved(self) -> bool:
        return self.assignment is not None


def _end_time(t_sep: float, t_end: float | None) -> float:
    """Explicit t_end, or 1.5 t_sep; never an unbounded integration."""
    if t_end is None:
        if not math.isfinite(t_sep):
            raise StateError("Packets never separate; pass a finite t_end")
        t_end = 1.5 * t_sep
    if not (math.isfinite(t_end) and t_end >= 0):
        raise StateError(f"t_end must be finite and non-negative, got {t_end}")
    return t_end


def _time_grid(t_end: float, dt: float) -> np.ndarray:
    steps = max(1, int(round(t_end / dt)))
    return np.linspace(0.0, t_end, steps + 1)


def integrate_trajectory(
    p: PacketPair,
    x0: float,
    dt: float = 0.1,
    t_end: float | None = None,
) -> Trajectory:
    """
    Integrate dx/dt = guidance_velocity with an adaptive embedded Runge-Kutta
    scheme (tolerance 1e-8), sampling every dt. Assigned to a branch only if
    t_end reaches the separation time.
    """
    t_sep = separation_time(p)
    t_end = _end_time(t_sep, t_end)
    times = _time_grid(t_end, dt)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.asarray([guidance_velocity(p, float(y[0]), t)])

    try:
        sol = solve_ivp(rhs, (0.0, t_end), [x0], t_eval=times, rtol=RTOL, atol=ATOL)
    except NodalRegionError as e:
        logger.debug(f"Trajectory from x0={x0} stalled: {e}")
        return Trajectory(times[:1], np.asarray([x0]), None, f"nodal region: {e}")
    if not sol.success:
        return Trajectory(sol.t, sol.y[0], None, sol.message)
    positions = sol.y[0]
    assignment = None
    diagnostics = f"{sol.nfev} evaluations"
    if t_end >= t_sep:
        assignment = int(_assign(p, positions[-1:], t_end)[0])
    else:
        diagnostics += f"; t_end {t_end:.3g} < t_sep {t_sep:.3g}"
    return Trajectory(sol.t, positions, assignment, diagnostics)


@dataclass
class Ensemble:
    """Many trajectories integrated together: positions[time, sample]."""
    times: np.ndarray
    positions: np.ndarray
    assignments: np.ndarray
    nodal: np.ndarray

    @property
    def unresolved(self) -> int:
        return int(np.count_nonzero(self.assignments == 0))


def integrate_ensemble(
    p: PacketPair,
    x0: Sequence[float] | np.ndarray,
    t_end: float | None = None,
    t_eval: Sequence[float] | None = None,
) -> Ensemble:
    """
    Integrate all starting points as one vectorised system through solve_ivp.

    Samples that enter a nodal region are frozen there and left unassigned.
    """
    x0 = np.asarray(x0, dtype=float)
    t_sep = separation_time(p)
    t_end = _end_time(t_sep, t_end)
    times = np.asarray(t_eval) if t_eval is not None else np.asarray([0.0, t_end])
    nodal = np.zeros(x0.size, dtype=bool)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        velocity, log_abs = _field(p, y, t)
        stalled = ~(log_abs > _LOG_FLOOR)
        nodal[stalled] = True
        return np.where(stalled, 0.0, velocity)

    if x0.size == 0:
        empty = np.zeros((times.size, 0))
        return Ensemble(times, empty, np.zeros(0, dtype=int), nodal)
    sol = solve_ivp(rhs, (0.0, t_end), x0, t_eval=times, rtol=RTOL, atol=ATOL)
    if not sol.success:
        raise StateError(f"Ensemble integration failed: {sol.message}")
    positions = sol.y.T
    if t_end >= t_sep:
        assignments = _assign(p, positions[-1], t_end)
    else:
        assignments = np.zeros(x0.size, dtype=int)
    assignments = np.where(nodal, 0, assignments)
    logger.debug(f"Ensemble of {x0.size}: {sol.nfev} evaluations, {int(nodal.sum())} nodal")
    return Ensemble(sol.t, positions, assignments, nodal)


def cumulative_density(p: PacketPair, t: float) -> tuple[np.ndarray, np.ndarray]:
    """(grid, CDF of |ψ(x,t)|²) normalised to end at one."""
    grid = p.grid(t)
    cdf = cumulative_trapezoid(density(p, grid, t), grid, initial=0.0)
    return grid, cdf / cdf[-1]


def sample_positions(
    p: PacketPair,
    samples: int,
    seed: int,
    t: float = 0.0,
    density_shift: float = 0.0,
) -> np.ndarray:
    """
    Inverse-CDF samples from |ψ(x − density_shift, t)|².

    A non-zero shift gives a deliberately non-equilibrium initial density.
    Chunk c of 1000 samples draws from derive_seed(seed, c).
    """
    grid, cdf = cumulative_density(p, t)
    draws = [
        rng_for(seed, c).random(min(SAMPLE_CHUNK, samples - start))
        for c, start in enumerate(range(0, samples, SAMPLE_CHUNK))
    ]
    u = np.concatenate(draws) if draws else np.zeros(0)
    return np.interp(u, cdf, grid) + density_shift


def basin_boundary(p: PacketPair) -> float:
    """The x where the initial |ψ|² mass to the left equals |a1|²."""
    p1 = p.weights[0]
    if p1 <= 0.0:
        return -math.inf
    if p1 >= 1.0:
        return math.inf
    grid, cdf = cumulative_density(p, 0.0)
    return float(brentq(lambda x: np.interp(x, grid, cdf) - p1, grid[0], grid[-1], xtol=1e-12))


@dataclass
class EquivarianceReport:
    """Branch fractions of sampled trajectories against (|a1|², |a2|²)."""
    fractions: tuple[float, float]
    expected: tuple[float, float]
    samples: int
    unresolved: int
    density_shift: float = 0.0
    basin_mass: float = 0.0
    seed: int = 0

    @property
    def stderr(self) -> float:
        p = self.expected[0]
        return math.sqrt(p * (1 - p) / self.samples) if self.samples else 0.0

    @property
    def z_score(self) -> float:
        deviation = abs(self.fractions[0] - self.expected[0])
        if self.stderr == 0:
            return 0.0 if deviation == 0 else math.inf
        return deviation / self.stderr

    @property
    def within_3_sigma(self) -> bool:
        return self.z_score <= 3.0


def equivariance_report(
    p: PacketPair,
    samples: int,
    seed: int,
    t_end: float | None = None,
    density_shift: float = 0.0,
) -> EquivarianceReport:
    """Sample x0, integrate past separation and count branch assignments."""
    if not math.isfinite(separation_time(p)):
        raise StateError("Packets never separate; branch fractions are undefined")
    x0 = sample_positions(p, samples, seed, density_shift=density_shift)
    ensemble = integrate_ensemble(p, x0, t_end)
    resolved = max(samples - ensemble.unresolved, 1)
    first = int(np.count_nonzero(ensemble.assignments == 1))
    second = int(np.count_nonzero(ensemble.assignments == 2))
    boundary = basin_boundary(p)
    grid, cdf = cumulative_density(p, 0.0)
    basin_mass = float(np.interp(boundary, grid, cdf)) if math.isfinite(boundary) else p.weights[0]
    report = EquivarianceReport(
        fractions=(first / resolved, second / resolved),
        expected=p.weights,
        samples=samples,
        unresolved=ensemble.unresolved,
        density_shift=density_shift,
        basin_mass=basin_mass,
        seed=seed,
    )
    logger.info(
        f"Equivariance: fractions {report.fractions[0]:.4f}/{report.fractions[1]:.4f}, "
        f"expected {p.weights[0]:.4f}, z={report.z_score:.2f}"
    )
    return report


@dataclass
class ContextualityReport:
    """Assignments of the same x0 with the device displaced by −delta and +delta."""
    x0: float
    delta: float
    minus: int | None
    plus: int | None

    @property
    def flipped(self) -> bool:
        return self.minus is not None and self.plus is not None and self.minus != self.plus


def contextuality_probe(
    p: PacketPair,
    x0: float,
    delta: float,
    t_end: float | None = None,
) -> ContextualityReport:
    minus = integrate_trajectory(p.shifted(-delta), x0, t_end=t_end)
    plus = integrate_trajectory(p.shifted(delta), x0, t_end=t_end)
    return ContextualityReport(x0, delta, minus.assignment, plus.assignment)


@dataclass
class NoCrossingReport:
    pairs: int
    violations: int
    min_gap: float


def no_crossing_check(
    p: PacketPair,
    pairs: int,
    seed: int,
    t_end: float | None = None,
    checkpoints: int = 50,
) -> NoCrossingReport:
    """Integrate `pairs` ordered pairs x_a < x_b and check the order never flips."""
    starts = sample_positions(p, 2 * pairs, seed)
    ordered = np.sort(starts.reshape(pairs, 2), axis=1)
    t_end = _end_time(separation_time(p), t_end)
    times = np.linspace(0.0, t_end, checkpoints + 1)
    ensemble = integrate_ensemble(p, ordered.reshape(-1), t_end, times)
    paths = ensemble.positions.reshape(times.size, pairs, 2)
    gaps = paths[:, :, 1] - paths[:, :, 0]
    crossed = np.any(gaps <= 0, axis=0) & (ordered[:, 1] > ordered[:, 0])
    return NoCrossingReport(pairs, int(np.count_nonzero(crossed)), float(gaps.min()))


@dataclass
class TransportReport:
    """χ² of evolved samples against |ψ(x,t)|² in equal-probability bins."""
    t: float
    bins: int
    statistic: float
    p_value: float
    counts: list[int] = field(default_factory=list)


def density_transport(
    p: PacketPair,
    samples: int,
    seed: int,
    t: float,
    bins: int = 50,
) -> TransportReport:
    x0 = sample_positions(p, samples, seed)
    ensemble = integrate_ensemble(p, x0, t_end=t)
    evolved = ensemble.positions[-1]
    grid, cdf = cumulative_density(p, t)
    edges = np.interp(np.linspace(0.0, 1.0, bins + 1), cdf, grid)
    edges[0], edges[-1] = -np.inf, np.inf
    counts, _ = np.histogram(evolved, bins=edges)
    expected = np.full(bins, samples / bins)
    result = chisquare(counts, expected)
    return TransportReport(
        t=t,
        bins=bins,
        statistic=float(result.statistic),
        p_value=float(result.pvalue),
        counts=counts.tolist(),
    )
