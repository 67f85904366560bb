"""
Dense complex tensor algebra over labelled finite bases.

A StateVector is a flat complex128 amplitude array over the tensor product of
named factors, each with a finite alphabet of symbols. Basis elements are
tuples of BasisLabel(factor, symbol), enumerated row-major over the factors.

Factors may be passively re-expressed in a different orthonormal basis
(rotate_factor). The change of basis is kept on the state as a Frame, so that
record predicates can always be evaluated in the record basis
(to_record_frame).
"""

import itertools
import logging
import math
from collections.abc import Callable, Hashable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any, NamedTuple

import numpy as np
import scipy.linalg

from .types import StateError

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12
MAX_EXPM_DIM = 64

Symbol = Hashable


class BasisLabel(NamedTuple):
    """One factor's contribution to a basis element."""
    factor: str
    symbol: Symbol


BasisElement = tuple[BasisLabel, ...]
Predicate = Callable[[BasisElement], bool]


class OperatorKind(Enum):
    """Structural promise carried by a LinearOperator."""
    UNITARY = "unitary"
    HERMITIAN = "hermitian"
    GENERAL = "general"


@dataclass(frozen=True)
class Factor:
    """A named tensor factor with a finite, ordered alphabet."""
    name: str
    alphabet: tuple[Symbol, ...]

    def __post_init__(self) -> None:
        if not self.alphabet:
            raise StateError(f"Factor {self.name!r} has an empty alphabet")
        if len(set(self.alphabet)) != len(self.alphabet):
            raise StateError(f"Factor {self.name!r} has duplicate symbols")

    @property
    def dim(self) -> int:
        return len(self.alphabet)

    def index(self, symbol: Symbol) -> int:
        try:
            return self.alphabet.index(symbol)
        except ValueError:
            raise StateError(
                f"Symbol {symbol!r} not in alphabet of factor {self.name!r}"
            ) from None


@dataclass(frozen=True, eq=False)
class Frame:
    """
    Passive change of basis on one factor.

    Columns of `matrix` are the current basis vectors written in the record
    basis of `record`.
    """
    factor: str
    record: Factor
    matrix: np.ndarray


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StateVector:
    """Dense amplitudes over the tensor product of `factors`."""
    factors: tuple[Factor, ...]
    amps: np.ndarray
    frames: tuple[Frame, ...] = ()

    def __post_init__(self) -> None:
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise StateError(f"Duplicate factor names: {names}")
        amps = np.array(self.amps, dtype=np.complex128).reshape(-1)
        if amps.size != math.prod(f.dim for f in self.factors):
            raise StateError(
                f"Amplitude count {amps.size} does not match basis size "
                f"{math.prod(f.dim for f in self.factors)}"
            )
        if not np.all(np.isfinite(amps)):
            raise StateError("Amplitudes must be finite")
        object.__setattr__(self, "amps", _frozen(amps))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def dim(self) -> int:
        return int(self.amps.size)

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def factor(self, name: str) -> Factor:
        for f in self.factors:
            if f.name == name:
                return f
        raise StateError(f"No factor named {name!r}")

    def axis(self, name: str) -> int:
        return self.factor_names.index(self.factor(name).name)

    def frame(self, name: str) -> Frame | None:
        for fr in self.frames:
            if fr.factor == name:
                return fr
        return None

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per factor."""
        return self.amps.reshape(self.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def iter_basis(self) -> Iterator[BasisElement]:
        labelled = [
            [BasisLabel(f.name, s) for s in f.alphabet] for f in self.factors
        ]
        return iter(itertools.product(*labelled))

    @property
    def basis(self) -> list[BasisElement]:
        return list(self.iter_basis())

    def amplitude(self, symbols: Mapping[str, Symbol]) -> complex:
        """Amplitude of the basis element picking `symbols[name]` on every factor."""
        idx = tuple(f.index(symbols[f.name]) for f in self.factors)
        return complex(self.tensor()[idx])


@dataclass(frozen=True, eq=False)
class LinearOperator:
    """Dense complex matrix over the tensor product of `factors`."""
    factors: tuple[Factor, ...]
    matrix: np.ndarray
    kind: OperatorKind = OperatorKind.GENERAL

    def __post_init__(self) -> None:
        dim = math.prod(f.dim for f in self.factors)
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.shape != (dim, dim):
            raise StateError(
                f"Operator shape {matrix.shape} does not match basis size {dim}"
            )
        if not np.all(np.isfinite(matrix)):
            raise StateError("Operator entries must be finite")
        if self.kind == OperatorKind.UNITARY and not is_unitary(matrix):
            raise StateError("Operator flagged unitary but U†U differs from I")
        if self.kind == OperatorKind.HERMITIAN and not is_hermitian(matrix):
            raise StateError("Operator flagged hermitian but H differs from H†")
        object.__setattr__(self, "matrix", _frozen(matrix))

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def factor_names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)


def is_unitary(matrix: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    eye = np.eye(matrix.shape[0])
    return bool(np.max(np.abs(matrix.conj().T @ matrix - eye), initial=0.0) <= tol)


def is_hermitian(matrix: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(matrix - matrix.conj().T), initial=0.0) <= tol)


# Construction helpers


def basis_state(factors: Sequence[Factor], symbols: Mapping[str, Symbol]) -> StateVector:
    """The basis element selecting `symbols[name]` on each factor."""
    factors = tuple(factors)
    amps = np.zeros(tuple(f.dim for f in factors), dtype=np.complex128)
    amps[tuple(f.index(symbols[f.name]) for f in factors)] = 1.0
    return StateVector(factors, amps)


def single_factor_state(factor: Factor, amps: Sequence[complex]) -> StateVector:
    return StateVector((factor,), np.asarray(amps, dtype=np.complex128))


def normalize(psi: StateVector) -> StateVector:
    norm = psi.norm()
    if norm == 0.0:
        raise StateError("Cannot normalize the zero vector")
    return StateVector(psi.factors, psi.amps / norm, psi.frames)


def identity(factors: Sequence[Factor]) -> LinearOperator:
    factors = tuple(factors)
    dim = math.prod(f.dim for f in factors)
    return LinearOperator(factors, np.eye(dim), OperatorKind.UNITARY)


def embedded_unitary(
    factor: Factor,
    symbols: Sequence[Symbol],
    block: np.ndarray,
) -> LinearOperator:
    """
    Unitary on `factor` acting as `block` on the span of `symbols`
    and as the identity on the remaining symbols.
    """
    block = np.asarray(block, dtype=np.complex128)
    if block.shape != (len(symbols), len(symbols)):
        raise StateError("Block shape does not match the number of symbols")
    matrix = np.eye(factor.dim, dtype=np.complex128)
    idx = [factor.index(s) for s in symbols]
    matrix[np.ix_(idx, idx)] = block
    return LinearOperator((factor,), matrix, OperatorKind.UNITARY)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases


def random_hermitian(dim: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return scale * (z + z.conj().T) / 2


# Core operations


def tensor_product(u: StateVector, v: StateVector) -> StateVector:
    """u ⊗ v, with u's factors first."""
    overlap = set(u.factor_names) & set(v.factor_names)
    if overlap:
        raise StateError(f"Factor names overlap: {sorted(overlap)}")
    return StateVector(
        u.factors + v.factors,
        np.kron(u.amps, v.amps),
        u.frames + v.frames,
    )


def _same_basis(u: StateVector, v: StateVector) -> bool:
    if u.factors != v.factors or len(u.frames) != len(v.frames):
        return False
    for fu in u.frames:
        fv = v.frame(fu.factor)
        if fv is None or fu.record != fv.record or not np.array_equal(fu.matrix, fv.matrix):
            return False
    return True


def inner_product(u: StateVector, v: StateVector) -> complex:
    """⟨u|v⟩, conjugate-linear in u."""
    if not _same_basis(u, v):
        raise StateError("Inner product requires identical bases")
    return complex(np.vdot(u.amps, v.amps))


def _apply_to_axes(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    m = len(axes)
    dims = tuple(tensor.shape[a] for a in axes)
    op = matrix.reshape(dims + dims)
    moved = np.tensordot(op, tensor, axes=(list(range(m, 2 * m)), list(axes)))
    return np.moveaxis(moved, list(range(m)), list(axes))


def apply(opr: LinearOperator, psi: StateVector) -> StateVector:
    """
    Apply `opr` to `psi`.

    The operator may act on all of psi's factors or on a subset of them;
    factors are matched by name and must carry identical alphabets.
    """
    axes = []
    for f in opr.factors:
        if f.name not in psi.factor_names:
            raise StateError(f"Operator factor {f.name!r} not present in state")
        if psi.factor(f.name) != f:
            raise StateError(f"Alphabet mismatch on factor {f.name!r}")
        axes.append(psi.axis(f.name))
    if opr.dim != math.prod(psi.dims[a] for a in axes):
        raise StateError("Operator dimension does not match the state")
    result = _apply_to_axes(psi.tensor(), opr.matrix, axes)
    return StateVector(psi.factors, result, psi.frames)


def rotate_factor(
    psi: StateVector,
    factor: str,
    u2: LinearOperator,
    labels: Sequence[Symbol] | None = None,
) -> StateVector:
    """
    Re-express `factor` in the orthonormal basis given by the columns of `u2`.

    The vector itself is unchanged; only its coordinates move. The new basis
    symbols are `labels` (defaults to the old alphabet). The accumulated change
    of basis is kept as a Frame so record predicates can be evaluated later.
    """
    target = psi.factor(factor)
    if u2.dim != target.dim:
        raise StateError(f"Rotation dimension {u2.dim} does not match factor {factor!r}")
    if not is_unitary(u2.matrix):
        raise StateError("rotate_factor requires a unitary")
    new_factor = Factor(target.name, tuple(labels) if labels is not None else target.alphabet)
    if new_factor.dim != target.dim:
        raise StateError("Label count does not match the factor dimension")

    axis = psi.axis(factor)
    coords = _apply_to_axes(psi.tensor(), u2.matrix.conj().T, [axis])

    previous = psi.frame(factor)
    if previous is None:
        frame = Frame(factor, target, u2.matrix.copy())
    else:
        frame = Frame(factor, previous.record, previous.matrix @ u2.matrix)
    frames = tuple(fr for fr in psi.frames if fr.factor != factor) + (frame,)
    factors = tuple(new_factor if f.name == factor else f for f in psi.factors)
    return StateVector(factors, coords, frames)


def to_record_frame(psi: StateVector) -> StateVector:
    """Undo every passive re-expression, returning coordinates in the record basis."""
    if not psi.frames:
        return psi
    tensor = psi.tensor()
    factors = list(psi.factors)
    for fr in psi.frames:
        axis = psi.axis(fr.factor)
        tensor = _apply_to_axes(tensor, fr.matrix, [axis])
        factors[axis] = fr.record
    return StateVector(tuple(factors), tensor)


def subspace_weight(psi: StateVector, predicate: Predicate) -> float:
    """Σ|amp|² over basis elements satisfying `predicate`."""
    mask = np.fromiter(
        (bool(predicate(element)) for element in psi.iter_basis()),
        dtype=bool,
        count=psi.dim,
    )
    return float(np.sum(np.abs(psi.amps[mask]) ** 2))


def symbol_of(element: BasisElement, factor: str) -> Symbol:
    """The symbol `element` carries on `factor`."""
    for label in element:
        if label.factor == factor:
            return label.symbol
    raise StateError(f"No factor named {factor!r} in basis element")


def matrix_exponential(h: LinearOperator, t: float) -> LinearOperator:
    """exp(-i·h·t) as a unitary LinearOperator over h's factors."""
    if not is_hermitian(h.matrix):
        raise StateError("Time evolution requires a hermitian generator")
    if h.dim > MAX_EXPM_DIM:
        raise StateError(f"Generator dimension {h.dim} exceeds {MAX_EXPM_DIM}")
    u = scipy.linalg.expm(-1j * t * np.asarray(h.matrix))
    return LinearOperator(h.factors, u, OperatorKind.UNITARY)


def matrix_exponential_apply(h: LinearOperator, t: float, psi: StateVector) -> StateVector:
    """exp(-i·h·t)|psi⟩; h may act on a subset of psi's factors."""
    return apply(matrix_exponential(h, t), psi)


def gram_matrix(states: Sequence[StateVector]) -> np.ndarray:
    n = len(states)
    gram = np.empty((n, n), dtype=np.complex128)
    for i, j in itertools.product(range(n), repeat=2):
        gram[i, j] = inner_product(states[i], states[j])
    return gram


# JSON-ready dictionaries. Floats go through repr, so round trips are bit-exact.


def _symbol_to_json(symbol: Symbol) -> Any:
    if isinstance(symbol, tuple):
        return [_symbol_to_json(s) for s in symbol]
    return symbol


def _symbol_from_json(value: Any) -> Symbol:
    if isinstance(value, list):
        return tuple(_symbol_from_json(v) for v in value)
    return value


def _factor_to_dict(factor: Factor) -> dict[str, Any]:
    return {"name": factor.name, "alphabet": [_symbol_to_json(s) for s in factor.alphabet]}


def _factor_from_dict(data: Mapping[str, Any]) -> Factor:
    return Factor(data["name"], tuple(_symbol_from_json(s) for s in data["alphabet"]))


def _complex_pairs(values: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in values.reshape(-1)]


def state_to_dict(psi: StateVector) -> dict[str, Any]:
    return {
        "factors": [_factor_to_dict(f) for f in psi.factors],
        "amplitudes": _complex_pairs(psi.amps),
        "frames": [
            {
                "factor": fr.factor,
                "record": _factor_to_dict(fr.record),
                "matrix": _complex_pairs(fr.matrix),
            }
            for fr in psi.frames
        ],
    }


def state_from_dict(data: Mapping[str, Any]) -> StateVector:
    factors = tuple(_factor_from_dict(f) for f in data["factors"])
    amps = np.array([complex(re, im) for re, im in data["amplitudes"]], dtype=np.complex128)
    frames = []
    for fr in data.get("frames", []):
        record = _factor_from_dict(fr["record"])
        matrix = np.array([complex(re, im) for re, im in fr["matrix"]], dtype=np.complex128)
        frames.append(Frame(fr["factor"], record, matrix.reshape(record.dim, record.dim)))
    return StateVector(factors, amps, tuple(frames))


__all__ = [
    "BasisElement",
    "BasisLabel",
    "Factor",
    "Frame",
    "LinearOperator",
    "OperatorKind",
    "StateVector",
    "apply",
    "basis_state",
    "embedded_unitary",
    "gram_matrix",
    "identity",
    "inner_product",
    "is_hermitian",
    "is_unitary",
    "matrix_exponential",
    "matrix_exponential_apply",
    "normalize",
    "random_hermitian",
    "random_unitary",
    "rotate_factor",
    "single_factor_state",
    "state_from_dict",
    "state_to_dict",
    "subspace_weight",
    "symbol_of",
    "tensor_product",
    "to_record_frame",
]
