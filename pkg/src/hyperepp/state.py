"""Amplitude-vector registers over polarization, spatial-mode and spin qubits.

Qubits are addressed by :class:`QubitLabel`, never by position.  Inside a
register the labels are kept sorted by ``(owner, kind)`` so two registers
holding the same qubits always share one layout.

Basis conventions (index 0 / index 1):

* polarization: ``|R>`` / ``|L>``
* spatial mode: ``|x1>`` / ``|x2>``
* electron spin: ``|up>`` / ``|down>``
"""
from __future__ import annotations

from dataclasses import dataclass
import enum
import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np

NORM_TOL = 1e-9
_S = 1 / math.sqrt(2)


class Kind(enum.IntEnum):
    POL = 0
    SPA = 1
    SPIN = 2


class QubitLabel(NamedTuple):
    owner: str
    kind: Kind

    def __str__(self) -> str:
        return f"{self.owner}.{self.kind.name.lower()}"


def pol(owner: str) -> QubitLabel:
    return QubitLabel(owner, Kind.POL)


def spa(owner: str) -> QubitLabel:
    return QubitLabel(owner, Kind.SPA)


def spin(owner: str) -> QubitLabel:
    return QubitLabel(owner, Kind.SPIN)


class Bell(enum.Enum):
    PHI_PLUS = "phi+"
    PHI_MINUS = "phi-"
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"

    @property
    def vector(self) -> np.ndarray:
        return _BELL_VECTORS[self]

    @property
    def parity(self) -> int:
        """0 for the even (phi) states, 1 for the odd (psi) states."""
        return 0 if self in (Bell.PHI_PLUS, Bell.PHI_MINUS) else 1


_BELL_VECTORS = {
    Bell.PHI_PLUS: np.array([_S, 0, 0, _S], dtype=complex),
    Bell.PHI_MINUS: np.array([_S, 0, 0, -_S], dtype=complex),
    Bell.PSI_PLUS: np.array([0, _S, _S, 0], dtype=complex),
    Bell.PSI_MINUS: np.array([0, _S, -_S, 0], dtype=complex),
}


@dataclass(frozen=True)
class HyperBellLabel:
    pol: Bell
    spa: Bell

    def __str__(self) -> str:
        return f"({self.pol.value},{self.spa.value})"


ALL_HYPER_BELL = tuple(HyperBellLabel(p, s) for p in Bell for s in Bell)


class NormClass(enum.Enum):
    NORMALIZED = "normalized"
    SUBNORMALIZED = "subnormalized"


class Basis(enum.Enum):
    COMPUTATIONAL = "computational"
    DIAGONAL = "diagonal"


class SingleOp(enum.Enum):
    HWP_X = "hwp_x"
    PHASE_Z_POL = "phase_z_pol"
    PHASE_Z_SPA = "phase_z_spa"
    H_POL = "h_pol"
    H_SPA = "h_spa"
    H_SPIN = "h_spin"
    BIT_X_SPA = "bit_x_spa"


X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) * _S
P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

_SINGLE_OPS: dict[SingleOp, tuple[Kind, np.ndarray]] = {
    SingleOp.HWP_X: (Kind.POL, X),
    SingleOp.PHASE_Z_POL: (Kind.POL, Z),
    SingleOp.PHASE_Z_SPA: (Kind.SPA, Z),
    SingleOp.H_POL: (Kind.POL, H),
    SingleOp.H_SPA: (Kind.SPA, H),
    SingleOp.H_SPIN: (Kind.SPIN, H),
    SingleOp.BIT_X_SPA: (Kind.SPA, X),
}

# rows are the basis vectors of each measurement basis
_BASES = {
    Basis.COMPUTATIONAL: np.eye(2, dtype=complex),
    Basis.DIAGONAL: np.array([[_S, _S], [_S, -_S]], dtype=complex),
}


class StateError(ValueError):
    """Raised on malformed register operations."""


@dataclass(frozen=True, eq=False)
class RegisterState:
    labels: tuple[QubitLabel, ...]
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise StateError(f"duplicate labels in {self.labels}")
        if tuple(sorted(self.labels)) != self.labels:
            raise StateError("labels must be sorted; build registers with make_state()")
        if self.amplitudes.shape != (2 ** len(self.labels),):
            raise StateError(
                f"{len(self.labels)} labels need {2 ** len(self.labels)} amplitudes, "
                f"got shape {self.amplitudes.shape}"
            )
        self.amplitudes.flags.writeable = False
        if self.norm_sq > 1 + NORM_TOL:
            raise StateError(f"state norm^2 {self.norm_sq} exceeds 1")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @property
    def norm_class(self) -> NormClass:
        if abs(self.norm_sq - 1) <= NORM_TOL:
            return NormClass.NORMALIZED
        return NormClass.SUBNORMALIZED

    def index(self, label: QubitLabel) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"label {label} not in register {list(map(str, self.labels))}") from None

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n)

    def normalized(self) -> "RegisterState":
        nrm = math.sqrt(self.norm_sq)
        if nrm == 0:
            raise StateError("cannot normalize a zero-norm state")
        return RegisterState(self.labels, self.amplitudes / nrm)

    def __repr__(self) -> str:
        return f"RegisterState({[str(l) for l in self.labels]}, norm_sq={self.norm_sq:.6g})"


def make_state(labels: Sequence[QubitLabel], amplitudes: np.ndarray) -> RegisterState:
    """Build a register from amplitudes given in the order of ``labels``."""
    labels = tuple(labels)
    amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
    if amps.shape != (2 ** len(labels),):
        raise StateError(f"{len(labels)} labels need {2 ** len(labels)} amplitudes")
    order = sorted(range(len(labels)), key=lambda i: labels[i])
    if order != list(range(len(labels))):
        amps = amps.reshape((2,) * len(labels)).transpose(order).reshape(-1)
    return RegisterState(tuple(labels[i] for i in order), amps.copy())


def basis_state(label: QubitLabel, value: int | Sequence[complex]) -> RegisterState:
    """Single-qubit register; ``value`` is 0, 1 or an explicit amplitude pair."""
    if isinstance(value, (int, np.integer)):
        amps = np.zeros(2, dtype=complex)
        amps[value] = 1
    else:
        amps = np.asarray(value, dtype=complex)
    return make_state([label], amps)


def tensor(a: RegisterState, b: RegisterState) -> RegisterState:
    overlap = set(a.labels) & set(b.labels)
    if overlap:
        raise StateError(f"overlapping labels {sorted(map(str, overlap))}")
    return make_state(a.labels + b.labels, np.kron(a.amplitudes, b.amplitudes))


def tensor_all(states: Iterable[RegisterState]) -> RegisterState:
    states = list(states)
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def apply_matrix(matrix: np.ndarray, targets: Sequence[QubitLabel], s: RegisterState) -> RegisterState:
    """Apply a ``2^k x 2^k`` operator whose index order follows ``targets``.

    The operator need not be unitary (Kraus branches shrink the norm).
    """
    k = len(targets)
    axes = [s.index(t) for t in targets]
    op = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * k))
    out = np.tensordot(op, s.tensor(), axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return RegisterState(s.labels, out.reshape(-1))


def apply_single(op: SingleOp, target: QubitLabel, s: RegisterState) -> RegisterState:
    kind, matrix = _SINGLE_OPS[op]
    if target.kind is not kind:
        raise StateError(f"{op.name} acts on {kind.name} qubits, not {target}")
    return apply_matrix(matrix, [target], s)


def swap_qubits(a: QubitLabel, b: QubitLabel, s: RegisterState) -> RegisterState:
    """Exchange the states of two qubits of the register."""
    i, j = s.index(a), s.index(b)
    return RegisterState(s.labels, np.swapaxes(s.tensor(), i, j).reshape(-1))


def _basis_rows(basis: Basis) -> np.ndarray:
    return _BASES[basis]


def outcome_probabilities(target: QubitLabel, basis: Basis, s: RegisterState) -> np.ndarray:
    """Born probabilities of the two outcomes, relative to the current norm."""
    nrm = s.norm_sq
    if nrm <= 0:
        raise StateError("cannot measure a zero-norm state")
    proj = np.tensordot(_basis_rows(basis).conj(), s.tensor(), axes=([1], [s.index(target)]))
    weights = np.sum(np.abs(proj.reshape(2, -1)) ** 2, axis=1)
    return weights / nrm


def project(target: QubitLabel, basis: Basis, outcome: int, s: RegisterState) -> RegisterState:
    """Unnormalized projection of ``target`` onto one basis vector (qubit kept)."""
    vec = _basis_rows(basis)[outcome]
    return apply_matrix(np.outer(vec, vec.conj()), [target], s)


def measure(
    target: QubitLabel, basis: Basis, s: RegisterState, rng: np.random.Generator
) -> tuple[int, RegisterState, float]:
    """Projective measurement with Born-rule sampling.

    Returns ``(outcome, collapsed, probability)``; the collapsed state is
    renormalized to unit norm and keeps the measured qubit.
    """
    probs = outcome_probabilities(target, basis, s)
    outcome = int(rng.random() >= probs[0])
    return outcome, project(target, basis, outcome, s).normalized(), float(probs[outcome])


def remove(target: QubitLabel, basis: Basis, outcome: int, s: RegisterState) -> RegisterState:
    """Contract ``target`` with a basis vector and drop it from the register.

    Used for consumed ancillas and detected photons; the norm of the result is
    the norm of the corresponding projection.
    """
    vec = _basis_rows(basis)[outcome]
    out = np.tensordot(vec.conj(), s.tensor(), axes=([0], [s.index(target)]))
    labels = tuple(l for l in s.labels if l != target)
    return RegisterState(labels, out.reshape(-1))


def measure_and_remove(
    target: QubitLabel, basis: Basis, s: RegisterState, rng: np.random.Generator
) -> tuple[int, RegisterState, float]:
    probs = outcome_probabilities(target, basis, s)
    outcome = int(rng.random() >= probs[0])
    return outcome, remove(target, basis, outcome, s).normalized(), float(probs[outcome])


def reduced_density(s: RegisterState, keep: Sequence[QubitLabel]) -> np.ndarray:
    """Reduced density matrix of ``keep`` (index order follows ``keep``), trace 1."""
    axes = [s.index(l) for l in keep]
    rest = [i for i in range(s.n) if i not in axes]
    psi = np.transpose(s.tensor(), axes + rest).reshape(2 ** len(axes), -1)
    rho = psi @ psi.conj().T
    return rho / np.trace(rho).real


def bell_pair_state(bell: Bell, a: QubitLabel, b: QubitLabel) -> RegisterState:
    return make_state([a, b], bell.vector)


def hyper_bell_vector(label: HyperBellLabel) -> np.ndarray:
    """16-vector in the order (pol_a, pol_b, spa_a, spa_b)."""
    return np.kron(label.pol.vector, label.spa.vector)


def make_bell_pair(label: HyperBellLabel, photons: tuple[str, str]) -> RegisterState:
    a, b = photons
    if a == b:
        raise StateError(f"photon ids must differ, got {a!r} twice")
    return tensor(bell_pair_state(label.pol, pol(a), pol(b)), bell_pair_state(label.spa, spa(a), spa(b)))


def pair_labels(photons: tuple[str, str]) -> list[QubitLabel]:
    a, b = photons
    return [pol(a), pol(b), spa(a), spa(b)]


def fidelity_to(label: HyperBellLabel, s: RegisterState, photons: tuple[str, str]) -> float:
    """``|<label|s>|^2 / <s|s>`` for a register holding exactly one photon pair."""
    wanted = pair_labels(photons)
    if set(s.labels) != set(wanted):
        raise StateError(f"expected exactly the qubits {[str(l) for l in wanted]}, got {list(map(str, s.labels))}")
    target = make_state(wanted, hyper_bell_vector(label))
    return abs(np.vdot(target.amplitudes, s.amplitudes)) ** 2 / s.norm_sq


def dof_fidelity(s: RegisterState, photons: tuple[str, str], kind: Kind, bell: Bell = Bell.PHI_PLUS) -> float:
    """Fidelity of one degree of freedom of a photon pair to a Bell state.

    Other qubits in the register are traced out.
    """
    a, b = photons
    rho = reduced_density(s, [QubitLabel(a, kind), QubitLabel(b, kind)])
    v = bell.vector
    return float(np.vdot(v, rho @ v).real)


def rename(s: RegisterState, mapping: dict[str, str]) -> RegisterState:
    """Relabel qubit owners, e.g. ``{"A": "A'"}``; unmapped owners are kept."""
    labels = [QubitLabel(mapping.get(l.owner, l.owner), l.kind) for l in s.labels]
    return make_state(labels, s.amplitudes)


def discard(targets: Iterable[QubitLabel], s: RegisterState, rng: np.random.Generator) -> RegisterState:
    """Drop qubits by measuring them and forgetting the results.

    Averaged over outcomes this is the partial trace; along one trajectory it
    keeps the remaining register pure.
    """
    for t in targets:
        _, s, _ = measure_and_remove(t, Basis.COMPUTATIONAL, s, rng)
    return s
