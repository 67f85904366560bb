"""
Measurement-chain branch states.

Builds the Stern-Gerlach chain system → detectors → observer → write register
as a dense state over four factors and checks the structural claims made
about it: branch orthogonality, vanishing inter-branch Hamiltonian elements,
conservation of branch weights, and the write register never holding the
non-classical symbol in any observer basis.

Factor alphabets for n outcomes:
    system:   1..n
    detector: "blank", "D:1,yes", ..., "D:n,yes"
    observer: "blank", 1..n
    write:    "blank", 1..n, "∞"
"""

import json
import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any

import numpy as np

from .tensorcore import (
    BasisElement,
    Factor,
    LinearOperator,
    OperatorKind,
    StateVector,
    apply,
    basis_state,
    embedded_unitary,
    gram_matrix,
    inner_product,
    is_hermitian,
    matrix_exponential,
    random_hermitian,
    rotate_factor,
    state_from_dict,
    state_to_dict,
    subspace_weight,
    symbol_of,
    tensor_product,
    to_record_frame,
)
from .types import StateError

logger = logging.getLogger(__name__)

SYSTEM = "system"
DETECTOR = "detector"
OBSERVER = "observer"
WRITE = "write"

BLANK = "blank"
NONCLASSICAL = "∞"

NORMALIZATION_TOL = 1e-10
WEIGHT_TOL = 1e-12

COLOURS = {frozenset({1}): "blue", frozenset({2}): "yellow", frozenset({1, 2}): "green"}


class Stage(Enum):
    """How far along the measurement chain a state is."""
    PREPARED = 0
    DETECTED = 1
    OBSERVED = 2
    WRITTEN = 3


def detector_symbol(k: int) -> str:
    return f"D:{k},yes"


def detector_yes_set(symbol: Any) -> frozenset[int]:
    """Outcome indices whose detector reads yes in a detector symbol."""
    if symbol == BLANK:
        return frozenset()
    head, _, tail = str(symbol).partition(",")
    if not head.startswith("D:") or tail != "yes":
        raise StateError(f"Not a detector record: {symbol!r}")
    return frozenset(int(part) for part in head[2:].split("+"))


def system_factor(n: int) -> Factor:
    return Factor(SYSTEM, tuple(range(1, n + 1)))


def detector_factor(n: int) -> Factor:
    return Factor(DETECTOR, (BLANK,) + tuple(detector_symbol(k) for k in range(1, n + 1)))


def observer_factor(n: int) -> Factor:
    return Factor(OBSERVER, (BLANK,) + tuple(range(1, n + 1)))


def write_factor(n: int) -> Factor:
    return Factor(WRITE, (BLANK,) + tuple(range(1, n + 1)) + (NONCLASSICAL,))


@dataclass(frozen=True, eq=False)
class BranchState:
    """A measurement-chain state Σ a(k)|branch k⟩ with its record factors."""
    state: StateVector
    amplitudes: tuple[complex, ...]
    stage: Stage
    leakage: float = 0.0

    @property
    def n(self) -> int:
        return len(self.amplitudes)

    def branch_index(self, element: BasisElement) -> int | None:
        """
        The branch a basis element belongs to: its detector record once the
        detectors are coupled, its system symbol before that.
        """
        if self.stage == Stage.PREPARED:
            return int(symbol_of(element, SYSTEM))
        yes = detector_yes_set(symbol_of(element, DETECTOR))
        return next(iter(yes)) if len(yes) == 1 else None

    def branch_projection(self, k: int) -> StateVector:
        """Unnormalised component of the state on branch k (record frame)."""
        record = to_record_frame(self.state)
        mask = np.fromiter(
            (self.branch_index(e) == k for e in record.iter_basis()),
            dtype=bool,
            count=record.dim,
        )
        return StateVector(record.factors, np.where(mask, record.amps, 0.0))

    def branch_vector(self, k: int) -> StateVector:
        proj = self.branch_projection(k)
        norm = proj.norm()
        if norm == 0.0:
            raise StateError(f"Branch {k} carries no weight")
        return StateVector(proj.factors, proj.amps / norm)

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "stage": self.stage.name.lower(),
            "leakage": self.leakage,
            "amplitudes": [[z.real, z.imag] for z in self.amplitudes],
            "state": state_to_dict(self.state),
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, ensure_ascii=False)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "BranchState":
        return cls(
            state=state_from_dict(data["state"]),
            amplitudes=tuple(complex(re, im) for re, im in data["amplitudes"]),
            stage=Stage[data["stage"].upper()],
            leakage=float(data.get("leakage", 0.0)),
        )

    @classmethod
    def from_json(cls, text: str) -> "BranchState":
        return cls.from_dict(json.loads(text))


@dataclass
class InterbranchReport:
    """Matrix elements ⟨branch j|H|branch k⟩."""
    matrix: np.ndarray
    max_offdiagonal: float
    is_block: bool


@dataclass
class WeightReport:
    """Per-branch weights before and after a time evolution."""
    initial: list[float]
    final: list[float]
    max_deviation: float
    state: BranchState | None = None


@dataclass
class ColourReport:
    """Which light reaches the observer on each branch."""
    per_branch: dict[int, str] = field(default_factory=dict)
    green_weight: float = 0.0

    @property
    def green_seen(self) -> bool:
        return self.green_weight > WEIGHT_TOL


# Building the chain


def premeasurement(a: Sequence[complex], n: int | None = None) -> BranchState:
    """Σ a(k)|k⟩ with detectors, observer and write register blank."""
    amps = tuple(complex(x) for x in a)
    if n is not None and n != len(amps):
        raise StateError(f"Expected {n} amplitudes, got {len(amps)}")
    n = len(amps)
    if n < 1:
        raise StateError("At least one outcome is required")
    total = sum(abs(x) ** 2 for x in amps)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise StateError(f"Amplitudes are not normalised: Σ|a|² = {total!r}")

    system = StateVector((system_factor(n),), np.array(amps))
    records = basis_state(
        (detector_factor(n), observer_factor(n), write_factor(n)),
        {DETECTOR: BLANK, OBSERVER: BLANK, WRITE: BLANK},
    )
    return BranchState(tensor_product(system, records), amps, Stage.PREPARED)


def _householder(dim: int, source: int, target: np.ndarray) -> np.ndarray:
    """Real reflection mapping basis vector `source` onto unit vector `target`."""
    w = -np.asarray(target, dtype=float)
    w[source] += 1.0
    return np.eye(dim) - 2.0 * np.outer(w, w) / float(w @ w)


def _controlled_write(
    control: Factor,
    target: Factor,
    vectors: dict[Any, np.ndarray],
) -> LinearOperator:
    """
    Unitary on control ⊗ target taking |c⟩|blank⟩ to |c⟩ ⊗ vectors[c];
    identity on the target for controls without an entry.
    """
    blank = target.index(BLANK)
    blocks = []
    for symbol in control.alphabet:
        vec = vectors.get(symbol)
        blocks.append(np.eye(target.dim) if vec is None else _householder(target.dim, blank, vec))
    dim = control.dim * target.dim
    matrix = np.zeros((dim, dim))
    for c, block in enumerate(blocks):
        sl = slice(c * target.dim, (c + 1) * target.dim)
        matrix[sl, sl] = block
    return LinearOperator((control, target), matrix, OperatorKind.UNITARY)


def _record_vector(target: Factor, symbol: Any) -> np.ndarray:
    vec = np.zeros(target.dim)
    vec[target.index(symbol)] = 1.0
    return vec


def _in_record_frame(
    psi: StateVector,
    fn: Callable[[StateVector], StateVector],
) -> StateVector:
    """Apply a record-basis map, keeping any re-expression the state carries."""
    out = fn(to_record_frame(psi))
    for fr in psi.frames:
        u = LinearOperator((fr.record,), fr.matrix, OperatorKind.UNITARY)
        out = rotate_factor(out, fr.factor, u, labels=psi.factor(fr.factor).alphabet)
    return out


def _blank_weight_defect(s: BranchState, factor: str) -> float:
    record = to_record_frame(s.state)
    return subspace_weight(record, lambda e: symbol_of(e, factor) != BLANK)


def _require(s: BranchState, stage: Stage, blank_factor: str) -> None:
    if s.stage != stage or _blank_weight_defect(s, blank_factor) > WEIGHT_TOL:
        raise StateError(
            f"Expected a {stage.name.lower()} state with a blank {blank_factor} register, "
            f"got stage {s.stage.name.lower()}"
        )


def couple_detectors(s: BranchState, leakage: float = 0.0) -> BranchState:
    """
    Correlate each system component k with detector record |D:k,yes⟩.

    `leakage` ε > 0 models imperfect detectors: component k writes
    √(1-ε²)|D:k,yes⟩ + ε|D:k+1,yes⟩ (cyclically).
    """
    _require(s, Stage.PREPARED, DETECTOR)
    if not 0.0 <= leakage < 1.0:
        raise StateError(f"Leakage must lie in [0, 1), got {leakage}")
    if leakage and s.n < 2:
        raise StateError("Leakage needs at least two outcomes")

    n = s.n
    det = detector_factor(n)
    vectors = {}
    for k in range(1, n + 1):
        vec = math.sqrt(1.0 - leakage**2) * _record_vector(det, detector_symbol(k))
        if leakage:
            vec = vec + leakage * _record_vector(det, detector_symbol(k % n + 1))
        vectors[k] = vec
    op = _controlled_write(system_factor(n), det, vectors)
    state = _in_record_frame(s.state, lambda psi: apply(op, psi))
    logger.debug(f"Coupled detectors for n={n} (leakage={leakage})")
    return replace(s, state=state, stage=Stage.DETECTED, leakage=leakage)


def couple_observer(s: BranchState) -> BranchState:
    """Observer record set to k wherever the detector reads |D:k,yes⟩."""
    _require(s, Stage.DETECTED, OBSERVER)
    n = s.n
    obs = observer_factor(n)
    vectors = {detector_symbol(k): _record_vector(obs, k) for k in range(1, n + 1)}
    op = _controlled_write(detector_factor(n), obs, vectors)
    state = _in_record_frame(s.state, lambda psi: apply(op, psi))
    return replace(s, state=state, stage=Stage.OBSERVED)


def couple_writer(s: BranchState) -> BranchState:
    """
    Linear extension of |Obs k, blank⟩ → |Obs k, writes k⟩.

    The writer is defined on the observer's record basis; a state carrying a
    re-expressed observer factor is evolved in the record basis and handed
    back in its original expression.
    """
    _require(s, Stage.OBSERVED, WRITE)
    n = s.n
    wr = write_factor(n)
    vectors = {k: _record_vector(wr, k) for k in range(1, n + 1)}
    op = _controlled_write(observer_factor(n), wr, vectors)
    state = _in_record_frame(s.state, lambda psi: apply(op, psi))
    return replace(s, state=state, stage=Stage.WRITTEN)


def full_chain(a: Sequence[complex], leakage: float = 0.0) -> BranchState:
    """premeasurement → detectors → observer → writer."""
    s = couple_detectors(premeasurement(a), leakage=leakage)
    return couple_writer(couple_observer(s))


# Analyses


def nonclassical_weight(s: BranchState) -> float:
    """Weight on {write = ∞} ∪ {write ≠ observer record}, in the record basis."""
    if s.stage != Stage.WRITTEN:
        raise StateError("nonclassical_weight requires a written state")
    record = to_record_frame(s.state)

    def nonclassical(element: BasisElement) -> bool:
        written = symbol_of(element, WRITE)
        return written == NONCLASSICAL or written != symbol_of(element, OBSERVER)

    return subspace_weight(record, nonclassical)


def branch_weights(s: BranchState) -> list[float]:
    return [s.branch_projection(k).norm() ** 2 for k in range(1, s.n + 1)]


def branch_gram(s: BranchState) -> np.ndarray:
    """Gram matrix of the normalised branch vectors."""
    return gram_matrix([s.branch_vector(k) for k in range(1, s.n + 1)])


def record_fidelity(s: BranchState) -> float:
    """Weight on basis elements whose detector record names the system outcome."""
    if s.stage == Stage.PREPARED:
        raise StateError("record_fidelity requires coupled detectors")
    record = to_record_frame(s.state)
    return subspace_weight(
        record,
        lambda e: detector_yes_set(symbol_of(e, DETECTOR)) == {symbol_of(e, SYSTEM)},
    )


def mixed_basis_rotation(n: int = 2) -> LinearOperator:
    """Hadamard on the observer records 1, 2 (blank untouched)."""
    if n != 2:
        raise StateError("Mixed observer states are defined for two outcomes")
    hadamard = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2)
    return embedded_unitary(observer_factor(n), (1, 2), hadamard)


def express_in_mixed_basis(s: BranchState) -> BranchState:
    """Re-express the observer factor in the a/b basis; the vector is unchanged."""
    u = mixed_basis_rotation(s.n)
    state = rotate_factor(s.state, OBSERVER, u, labels=(BLANK, "a", "b"))
    return replace(s, state=state)


def mixed_observer_states(s: BranchState) -> tuple[BranchState, BranchState]:
    """
    The a and b combinations (|branch 1⟩ ± |branch 2⟩)/√2 of an observed
    two-outcome state, with the branch coefficients a(k) stripped off.
    """
    if s.n != 2:
        raise StateError(f"Mixed observer states need n=2, got n={s.n}")
    if s.stage != Stage.OBSERVED:
        raise StateError("Mixed observer states are built after observer coupling")

    unit = []
    for k in (1, 2):
        a_k = s.amplitudes[k - 1]
        if a_k == 0:
            raise StateError(f"Branch {k} has zero amplitude")
        proj = s.branch_projection(k)
        unit.append(proj.amps / a_k)

    factors = s.branch_projection(1).factors
    root = 1 / math.sqrt(2)
    mixed = []
    for sign in (1.0, -1.0):
        amps = (unit[0] + sign * unit[1]) * root
        mixed.append(
            BranchState(
                StateVector(factors, amps),
                (complex(root), complex(sign * root)),
                Stage.OBSERVED,
                s.leakage,
            )
        )
    return mixed[0], mixed[1]


def colour_signal(s: BranchState) -> ColourReport:
    """
    Light reaching the observer: detector 1 yes → blue, detector 2 yes →
    yellow. Green would need both yes records on one basis element.
    """
    if s.n > 2:
        raise StateError("The colour signal is defined for at most two outcomes")
    if s.stage == Stage.PREPARED:
        raise StateError("colour_signal requires coupled detectors")
    record = to_record_frame(s.state)
    report = ColourReport()
    for element, amp in zip(record.iter_basis(), record.amps, strict=True):
        weight = abs(amp) ** 2
        if weight <= WEIGHT_TOL:
            continue
        yes = detector_yes_set(symbol_of(element, DETECTOR))
        colour = COLOURS.get(yes)
        if colour is None:
            continue
        if colour == "green":
            report.green_weight += weight
        else:
            report.per_branch[next(iter(yes))] = colour
    if report.green_seen:
        logger.warning(f"Green signal found with weight {report.green_weight}")
    return report


# Hamiltonians on system ⊗ detector


@dataclass(frozen=True, eq=False)
class BlockHamiltonian:
    """H = Σ_k H_k ⊗ Π_k, Π_k projecting onto detector record k."""
    blocks: tuple[np.ndarray, ...]
    operator: LinearOperator

    @property
    def n(self) -> int:
        return len(self.blocks)


def block_hamiltonian(blocks: Sequence[np.ndarray]) -> BlockHamiltonian:
    n = len(blocks)
    det = detector_factor(n)
    matrix = np.zeros((n * det.dim, n * det.dim), dtype=np.complex128)
    for k, block in enumerate(blocks, start=1):
        block = np.asarray(block, dtype=np.complex128)
        if block.shape != (n, n) or not is_hermitian(block):
            raise StateError(f"Block {k} must be an {n}x{n} hermitian matrix")
        projector = np.outer(_record_vector(det, detector_symbol(k)),
                             _record_vector(det, detector_symbol(k)))
        matrix += np.kron(block, projector)
    op = LinearOperator((system_factor(n), det), matrix, OperatorKind.HERMITIAN)
    return BlockHamiltonian(tuple(np.asarray(b) for b in blocks), op)


def random_block_hamiltonian(
    n: int,
    rng: np.random.Generator,
    scale: float = 1.0,
) -> BlockHamiltonian:
    return block_hamiltonian([random_hermitian(n, rng, scale) for _ in range(n)])


def cross_coupling(n: int, strength: float, j: int = 1, k: int = 2) -> LinearOperator:
    """strength·(|j, D:j⟩⟨k, D:k| + h.c.): a hop between branch records, not block diagonal."""
    det = detector_factor(n)
    system = np.zeros((n, n))
    system[j - 1, k - 1] = 1.0
    hop = np.kron(
        system,
        np.outer(_record_vector(det, detector_symbol(j)), _record_vector(det, detector_symbol(k))),
    )
    matrix = strength * (hop + hop.T)
    return LinearOperator((system_factor(n), det), matrix, OperatorKind.HERMITIAN)


def record_commutator_norm(h: LinearOperator) -> float:
    """max_k ‖[H, Π_k]‖ (max-entry norm) over the detector record projectors."""
    n = h.factors[0].dim
    det = detector_factor(n)
    worst = 0.0
    for k in range(1, n + 1):
        vec = _record_vector(det, detector_symbol(k))
        projector = np.kron(np.eye(n), np.outer(vec, vec))
        comm = h.matrix @ projector - projector @ h.matrix
        worst = max(worst, float(np.max(np.abs(comm))))
    return worst


def _operator(h: BlockHamiltonian | LinearOperator) -> LinearOperator:
    return h.operator if isinstance(h, BlockHamiltonian) else h


def interbranch_elements(h: BlockHamiltonian | LinearOperator, s: BranchState) -> InterbranchReport:
    """M(j,k) = ⟨branch j|H|branch k⟩; non-block operators are computed but flagged."""
    if s.stage == Stage.PREPARED:
        raise StateError("interbranch_elements requires coupled detectors")
    op = _operator(h)
    vectors = [s.branch_vector(k) for k in range(1, s.n + 1)]
    images = [apply(op, v) for v in vectors]
    matrix = np.array(
        [[inner_product(vj, hk) for hk in images] for vj in vectors],
        dtype=np.complex128,
    )
    off = matrix - np.diag(np.diag(matrix))
    is_block = record_commutator_norm(op) <= WEIGHT_TOL
    if not is_block:
        logger.debug("interbranch_elements called with a non-block operator")
    return InterbranchReport(matrix, float(np.max(np.abs(off), initial=0.0)), is_block)


def evolve_and_check_weights(
    h: BlockHamiltonian | LinearOperator,
    s: BranchState,
    t: float,
) -> WeightReport:
    """Evolve by exp(-iHt) and compare per-branch weights with the initial ones."""
    if s.stage == Stage.PREPARED:
        raise StateError("evolve_and_check_weights requires coupled detectors")
    u = matrix_exponential(_operator(h), t)
    initial = branch_weights(s)
    evolved = replace(s, state=_in_record_frame(s.state, lambda psi: apply(u, psi)))
    final = branch_weights(evolved)
    deviation = max(abs(x - y) for x, y in zip(initial, final, strict=True))
    return WeightReport(initial, final, deviation, evolved)
