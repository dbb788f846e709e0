"""Fidelity-robust parity-check QNDs and SWAP gates built from the QD-cavity unit.

Every gadget uses a fresh ancilla spin, prepared in ``|phi+>``, measured at the
end and discarded.  Photons cross the circuit one after the other (A then C,
A then A').  Any detector click or photon loss aborts the gadget and is
reported as ``success=False``; on success the returned register is
normalized and ``amplitude_factor`` records the modulus of the global branch
amplitude that was divided out (``|T|**2`` for a QND, ``|T|**4`` for P-P SWAP).

The ``*_branch`` functions give the post-selected, unnormalized pass-branch
state including the ancilla, i.e. the gadget's map before the spin readout.
They raise :class:`~hyperepp.state.StateError` when the literal ``|T|``
exceeds one, since the branch is then not a valid register; the sampled
gadgets rescale the branch weights instead.
"""
from __future__ import annotations

from dataclasses import dataclass
import enum
from typing import Callable, Optional

import numpy as np

from .optics import ScatteringCoefficients
from .state import (
    Basis,
    Kind,
    QubitLabel,
    RegisterState,
    SingleOp,
    apply_single,
    basis_state,
    measure_and_remove,
    pol,
    spa,
    spin,
    swap_qubits,
    tensor,
)
from .unit import Branch, Traversal, apply_kraus, polarization_traversal, sample_traversal, spatial_traversal

ANCILLA_OWNER = "~qd"  # sorts after photon ids
ANCILLA = spin(ANCILLA_OWNER)
_PHI_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)


class Parity(enum.Enum):
    EVEN = 0
    ODD = 1


@dataclass(frozen=True)
class ParityOutcome:
    dof: Kind
    parity: Optional[Parity]
    success: bool
    amplitude_factor: float = 0.0
    failed_branch: Optional[Branch] = None

    def __post_init__(self) -> None:
        if not self.success and self.parity is not None:
            raise ValueError("a failed QND carries no parity")


@dataclass(frozen=True)
class SwapOutcome:
    success: bool
    spin_result: Optional[int] = None
    feedback_applied: bool = False
    amplitude_factor: float = 0.0
    failed_branch: Optional[Branch] = None


def _with_ancilla(s: RegisterState) -> RegisterState:
    if ANCILLA in s.labels:
        raise ValueError("register already holds the gadget ancilla")
    return tensor(s, basis_state(ANCILLA, _PHI_PLUS))


def _traversals(kind: Kind, photons: tuple[str, ...], coeffs: ScatteringCoefficients) -> list[Traversal]:
    build: Callable = polarization_traversal if kind is Kind.POL else spatial_traversal
    return [build(p, ANCILLA, coeffs) for p in photons]


def _run(
    trs: list[Traversal], s: RegisterState, rng: np.random.Generator
) -> tuple[Optional[RegisterState], Optional[Branch]]:
    for tr in trs:
        out = sample_traversal(tr, s, rng)
        if out.branch is not Branch.PASS:
            return None, out.branch
        s = out.post_state
    return s, None


def _branch(trs: list[Traversal], s: RegisterState) -> RegisterState:
    amps = s
    for tr in trs:
        amps = RegisterState(amps.labels, apply_kraus(tr.k_pass, tr.targets, amps))
    return amps


def _check_photons(s: RegisterState, photons: tuple[str, ...], kinds: tuple[Kind, ...]) -> None:
    if len(set(photons)) != len(photons):
        raise ValueError(f"gadget photons must be distinct, got {photons}")
    for p in photons:
        for k in kinds:
            s.index(QubitLabel(p, k))


def qnd_branch(kind: Kind, pA: str, pC: str, s: RegisterState, coeffs: ScatteringCoefficients) -> RegisterState:
    """Pass-branch state of a parity QND, ancilla still attached (spin not yet read)."""
    _check_photons(s, (pA, pC), (Kind.POL, Kind.SPA))
    return _branch(_traversals(kind, (pA, pC), coeffs), _with_ancilla(s))


def _parity_qnd(
    kind: Kind, pA: str, pC: str, s: RegisterState, coeffs: ScatteringCoefficients, rng: np.random.Generator
) -> tuple[ParityOutcome, Optional[RegisterState]]:
    _check_photons(s, (pA, pC), (Kind.POL, Kind.SPA))
    out, failed = _run(_traversals(kind, (pA, pC), coeffs), _with_ancilla(s), rng)
    if out is None:
        return ParityOutcome(kind, None, False, failed_branch=failed), None
    bit, out, _ = measure_and_remove(ANCILLA, Basis.DIAGONAL, out, rng)
    return ParityOutcome(kind, Parity(bit), True, abs(coeffs.T) ** 2), out


def parity_qnd_pol(
    pA: str, pC: str, s: RegisterState, coeffs: ScatteringCoefficients, rng: np.random.Generator
) -> tuple[ParityOutcome, Optional[RegisterState]]:
    """Polarization parity of photons ``pA`` and ``pC``; spatial modes untouched."""
    return _parity_qnd(Kind.POL, pA, pC, s, coeffs, rng)


def parity_qnd_spa(
    pA: str, pC: str, s: RegisterState, coeffs: ScatteringCoefficients, rng: np.random.Generator
) -> tuple[ParityOutcome, Optional[RegisterState]]:
    """Spatial-mode parity of photons ``pA`` and ``pC``; polarization untouched."""
    return _parity_qnd(Kind.SPA, pA, pC, s, coeffs, rng)


def _hadamards(s: RegisterState, pA: str, pA2: str) -> RegisterState:
    s = apply_single(SingleOp.H_POL, pol(pA), s)
    s = apply_single(SingleOp.H_POL, pol(pA2), s)
    return apply_single(SingleOp.H_SPIN, ANCILLA, s)


def swap_pp_branch(pA: str, pA2: str, s: RegisterState, coeffs: ScatteringCoefficients) -> RegisterState:
    """Pass-branch state after both rounds and Hadamards, before the spin readout."""
    _check_photons(s, (pA, pA2), (Kind.POL,))
    trs = _traversals(Kind.POL, (pA, pA2), coeffs)
    s = _with_ancilla(s)
    for _ in range(2):
        s = _hadamards(_branch(trs, s), pA, pA2)
    return s


def swap_pp(
    pA: str, pA2: str, s: RegisterState, coeffs: ScatteringCoefficients, rng: np.random.Generator
) -> tuple[SwapOutcome, Optional[RegisterState]]:
    """Exchange the polarization states of two photons.

    Each of the two rounds sends both photons through the polarization stage
    and then applies Hadamards to both photons and the spin.  The spin is read
    in the ``{up, down}`` basis; ``down`` is fixed by a phase flip on both
    photons.
    """
    _check_photons(s, (pA, pA2), (Kind.POL,))
    trs = _traversals(Kind.POL, (pA, pA2), coeffs)
    s = _with_ancilla(s)
    for _ in range(2):
        s, failed = _run(trs, s, rng)
        if s is None:
            return SwapOutcome(False, failed_branch=failed), None
        s = _hadamards(s, pA, pA2)
    bit, s, _ = measure_and_remove(ANCILLA, Basis.COMPUTATIONAL, s, rng)
    if bit == 1:
        s = apply_single(SingleOp.PHASE_Z_POL, pol(pA), s)
        s = apply_single(SingleOp.PHASE_Z_POL, pol(pA2), s)
    return SwapOutcome(True, bit, bit == 1, abs(coeffs.T) ** 4), s


def swap_ps(p: str, s: RegisterState) -> RegisterState:
    """Exchange polarization and spatial-mode states of one photon (deterministic)."""
    return swap_qubits(pol(p), spa(p), s)


def swap_ss(
    pA: str, pA2: str, s: RegisterState, coeffs: ScatteringCoefficients, rng: np.random.Generator
) -> tuple[SwapOutcome, Optional[RegisterState]]:
    """Exchange the spatial-mode states of two photons: P-S, P-P, P-S."""
    _check_photons(s, (pA, pA2), (Kind.POL, Kind.SPA))
    s = swap_ps(pA2, swap_ps(pA, s))
    outcome, s = swap_pp(pA, pA2, s, coeffs, rng)
    if s is not None:
        s = swap_ps(pA2, swap_ps(pA, s))
    return outcome, s
