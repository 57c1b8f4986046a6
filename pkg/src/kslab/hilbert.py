"""Dense complex linear algebra over small labeled Hilbert spaces.

Everything here works on dimension 2 (one spin or one path) or dimension 4
(path x spin, or two spins). The four-mode basis order is
``(u,+), (u,-), (d,+), (d,-)``: the first tensor factor is the path
(``u`` is the +1 eigenvector of Z in slot 1) and the second is the spin.

All objects are immutable; the underlying arrays are flagged read-only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOL = 1e-12
ALLOWED_DIMS = (2, 4)

SPIN_LABELS = ("+", "-")
PATH_SPIN_LABELS = ("u,+", "u,-", "d,+", "d,-")

_PAULI = {
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(array) -> np.ndarray:
    out = np.array(array, dtype=complex)
    out.setflags(write=False)
    return out


def _check_dim(dim: int) -> None:
    if dim not in ALLOWED_DIMS:
        raise ValueError(f"dimension must be one of {ALLOWED_DIMS}, got {dim}")


def _check_square(matrix: np.ndarray) -> int:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    _check_dim(matrix.shape[0])
    if not np.all(np.isfinite(matrix)):
        raise ValueError("matrix contains NaN or Inf")
    return matrix.shape[0]


def default_labels(dim: int) -> tuple[str, ...]:
    _check_dim(dim)
    return SPIN_LABELS if dim == 2 else PATH_SPIN_LABELS


def frobenius(matrix) -> float:
    return float(np.linalg.norm(np.asarray(matrix), ord="fro"))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude vector over a labeled basis."""

    amplitudes: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "labels", tuple(self.labels))
        _check_dim(amps.size)
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes contain NaN or Inf")
        if len(self.labels) != amps.size:
            raise ValueError("need exactly one label per amplitude")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError(f"basis labels must be distinct: {self.labels}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL:
            raise ValueError(f"state is not normalized (norm {norm!r})")

    @classmethod
    def from_amplitudes(cls, amplitudes, labels: Sequence[str] | None = None) -> "StateVector":
        """Build a state, rescaling the amplitudes to unit norm."""
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0 or not np.isfinite(norm):
            raise ValueError("cannot normalize a zero or non-finite vector")
        if labels is None:
            labels = default_labels(amps.size)
        return cls(amps / norm, tuple(labels))

    @classmethod
    def basis(cls, label: str, labels: Sequence[str] | None = None) -> "StateVector":
        if labels is None:
            labels = PATH_SPIN_LABELS if label in PATH_SPIN_LABELS else SPIN_LABELS
        labels = tuple(labels)
        amps = np.zeros(len(labels), dtype=complex)
        amps[labels.index(label)] = 1.0
        return cls(amps, labels)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def amplitude(self, label: str) -> complex:
        return complex(self.amplitudes[self.labels.index(label)])

    def probabilities(self) -> dict[str, float]:
        return {lab: float(abs(a) ** 2) for lab, a in zip(self.labels, self.amplitudes)}

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.dim != self.dim:
            raise ValueError("dimension mismatch")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.inner(other)) ** 2

    def relabel(self, labels: Sequence[str]) -> "StateVector":
        return StateVector(self.amplitudes, tuple(labels))

    def __repr__(self):
        terms = ", ".join(f"{lab}: {complex(a):.6g}" for lab, a in zip(self.labels, self.amplitudes))
        return f"StateVector({terms})"


@dataclass(frozen=True, eq=False)
class Observable:
    """Hermitian operator, optionally named (``"Z1X2"`` etc.)."""

    matrix: np.ndarray
    name: str = ""

    def __post_init__(self):
        mat = _frozen(self.matrix)
        _check_square(mat)
        if frobenius(mat - mat.conj().T) > TOL:
            raise ValueError(f"observable {self.name or '(unnamed)'} is not Hermitian")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def is_involution(self) -> bool:
        return frobenius(self.matrix @ self.matrix - np.eye(self.dim)) <= TOL

    def __repr__(self):
        return f"Observable({self.name or self.matrix.tolist()})"


@dataclass(frozen=True, eq=False)
class UnitaryMap:
    """Unitary map between two labeled bases of equal dimension."""

    matrix: np.ndarray
    input_labels: tuple[str, ...]
    output_labels: tuple[str, ...]

    def __post_init__(self):
        mat = _frozen(self.matrix)
        dim = _check_square(mat)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "input_labels", tuple(self.input_labels))
        object.__setattr__(self, "output_labels", tuple(self.output_labels))
        if len(self.input_labels) != dim or len(self.output_labels) != dim:
            raise ValueError("label sequences must match the matrix dimension")
        defect = unitarity_defect(mat)
        if defect > TOL:
            raise ValueError(f"map is not unitary (|U^dag U - I|_F = {defect:.3e})")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, labels: Sequence[str]) -> "UnitaryMap":
        return cls(np.eye(len(labels)), tuple(labels), tuple(labels))

    def inverse(self) -> "UnitaryMap":
        return UnitaryMap(self.matrix.conj().T, self.output_labels, self.input_labels)


@dataclass(frozen=True, eq=False)
class ProjectorPair:
    """Spectral projectors onto the +1 and -1 eigenspaces of an involution."""

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "plus", _frozen(self.plus))
        object.__setattr__(self, "minus", _frozen(self.minus))

    def __iter__(self):
        yield self.plus
        yield self.minus

    def for_value(self, value: int) -> np.ndarray:
        if value == 1:
            return self.plus
        if value == -1:
            return self.minus
        raise ValueError(f"outcome must be +1 or -1, got {value!r}")


def unitarity_defect(matrix) -> float:
    mat = np.asarray(matrix, dtype=complex)
    return frobenius(mat.conj().T @ mat - np.eye(mat.shape[0]))


def pauli(axis: str) -> Observable:
    """Spin observable along ``axis`` with eigenvalues exactly +1 and -1."""
    try:
        return Observable(_PAULI[axis.upper()], name=axis.upper())
    except KeyError:
        raise ValueError(f"unknown axis {axis!r}; expected X, Y or Z") from None


def identity(dim: int) -> Observable:
    return Observable(np.eye(dim), name="I")


def embed(op: Observable, slot: int) -> Observable:
    """Lift a single-system observable into the four-dimensional space.

    Slot 1 is the first tensor factor (path, or particle 1), slot 2 the
    second (spin, or particle 2).
    """
    if op.dim != 2:
        raise ValueError(f"can only embed dimension-2 observables, got dim {op.dim}")
    eye = np.eye(2)
    if slot == 1:
        mat = np.kron(op.matrix, eye)
    elif slot == 2:
        mat = np.kron(eye, op.matrix)
    else:
        raise ValueError(f"slot must be 1 or 2, got {slot!r}")
    name = f"{op.name}{slot}" if op.name else ""
    return Observable(mat, name=name)


def product(a: Observable, b: Observable) -> Observable:
    """Matrix product ``a @ b``, rejected when the result is not Hermitian."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    mat = a.matrix @ b.matrix
    if frobenius(mat - mat.conj().T) > TOL:
        raise ValueError(
            f"product {a.name or '?'}*{b.name or '?'} is not Hermitian; the factors do not commute"
        )
    return Observable(mat, name=a.name + b.name if a.name and b.name else "")


def commutator(a: Observable, b: Observable) -> np.ndarray:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return _frozen(a.matrix @ b.matrix - b.matrix @ a.matrix)


def commutes(a: Observable, b: Observable) -> bool:
    return frobenius(commutator(a, b)) <= TOL


def spectral_projectors(o: Observable) -> ProjectorPair:
    """(I + o)/2 and (I - o)/2 for an involution ``o``.

    The identity is accepted and yields a zero ``minus`` projector.
    """
    if not o.is_involution():
        raise ValueError(f"observable {o.name or ''} is not an involution; no pure +/-1 spectrum")
    eye = np.eye(o.dim)
    return ProjectorPair((eye + o.matrix) / 2, (eye - o.matrix) / 2)


def expectation(s: StateVector, o: Observable) -> float:
    if s.dim != o.dim:
        raise ValueError(f"dimension mismatch: state {s.dim}, observable {o.dim}")
    value = np.vdot(s.amplitudes, o.matrix @ s.amplitudes)
    if abs(value.imag) > TOL:
        raise ArithmeticError(f"expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def apply(u: UnitaryMap, s: StateVector) -> StateVector:
    """Evolve ``s`` through ``u``; the result carries ``u``'s output labels."""
    if u.dim != s.dim:
        raise ValueError(f"dimension mismatch: map {u.dim}, state {s.dim}")
    if unitarity_defect(u.matrix) > TOL:
        raise ValueError("map is not unitary")
    return StateVector(u.matrix @ s.amplitudes, u.output_labels)


def random_state(rng: np.random.Generator, dim: int = 4, labels: Sequence[str] | None = None) -> StateVector:
    """Haar-random pure state (normalized complex Gaussian vector)."""
    vec = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return StateVector.from_amplitudes(vec, labels)


def random_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


# Named observables on the four-dimensional space.
Z1 = embed(pauli("Z"), 1)
Z2 = embed(pauli("Z"), 2)
X1 = embed(pauli("X"), 1)
X2 = embed(pauli("X"), 2)
Z1Z2 = product(Z1, Z2)
X1X2 = product(X1, X2)
Z1X2 = product(Z1, X2)
X1Z2 = product(X1, Z2)
Y1Y2 = Observable(np.kron(_PAULI["Y"], _PAULI["Y"]), name="Y1Y2")

OBSERVABLES: dict[str, Observable] = {
    o.name: o for o in (Z1, Z2, X1, X2, Z1Z2, X1X2, Z1X2, X1Z2, Y1Y2)
}

_R2 = 1 / np.sqrt(2)

# |u,+> etc. and the superpositions the scenarios use.
STATES: dict[str, StateVector] = {
    "u+": StateVector.basis("u,+"),
    "u-": StateVector.basis("u,-"),
    "d+": StateVector.basis("d,+"),
    "d-": StateVector.basis("d,-"),
    # simultaneous +1 eigenstate of Z1Z2 and X1X2
    "phi+": StateVector([_R2, 0, 0, _R2], PATH_SPIN_LABELS),
    # simultaneous -1 eigenstate of Z1Z2 and X1X2
    "singlet": StateVector([0, _R2, -_R2, 0], PATH_SPIN_LABELS),
    # (|u> + |d>)|+> / sqrt2
    "x+u": StateVector([_R2, 0, _R2, 0], PATH_SPIN_LABELS),
}

PHI_PLUS = STATES["phi+"]
SINGLET = STATES["singlet"]

SPIN_STATES: dict[str, StateVector] = {
    "z+": StateVector([1, 0], SPIN_LABELS),
    "z-": StateVector([0, 1], SPIN_LABELS),
    "x+": StateVector([_R2, _R2], SPIN_LABELS),
    "x-": StateVector([_R2, -_R2], SPIN_LABELS),
}
