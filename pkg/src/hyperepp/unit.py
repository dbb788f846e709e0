"""The modified QD-cavity unit as a heralded three-outcome operation.

A photon entering the unit in ``|R>`` leaves either

* towards the detector (amplitude ``D``), leaving the spin untouched, or
* in ``|L>`` with the spin phase-flipped, ``|phi+> <-> |phi->`` (amplitude ``T``),

and any remaining weight is lost.  The interferometer inside the unit is not
simulated path by path; the two Kraus branches are used directly.

The gadgets never feed the raw unit an ``|L>`` photon: half-wave plates in
front of it turn the selected arm into ``|R>``.  :func:`polarization_traversal`
and :func:`spatial_traversal` build the Kraus operators of one photon passing
such a wired stage.
"""
from __future__ import annotations

from dataclasses import dataclass
import enum
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .optics import ScatteringCoefficients
from .state import I2, P0, P1, X, Z, Kind, QubitLabel, RegisterState

_L_FROM_R = np.array([[0, 0], [1, 0]], dtype=complex)  # |L><R|


class Branch(enum.Enum):
    PASS = "pass"
    DETECTOR_CLICK = "click"
    LOSS = "loss"


@dataclass(frozen=True)
class UnitMap:
    """Kraus operators on ``(photon polarization, spin)``, pol-major index order."""

    k_pass: np.ndarray
    k_click: np.ndarray


@dataclass(frozen=True)
class Traversal:
    """Kraus operators for one photon crossing one wired circuit stage.

    ``targets`` fixes the qubit order of every operator.  ``k_click`` holds one
    operator per distinguishable detector event.
    """

    targets: tuple[QubitLabel, ...]
    k_pass: np.ndarray
    k_click: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class UnitOutcome:
    branch: Branch
    weight: float
    post_state: Optional[RegisterState] = None


def unit_map(coeffs: ScatteringCoefficients) -> UnitMap:
    """Raw unit: ``|R>|s> -> D|R>|s>`` (click) ``+ T|L> Z|s>`` (pass)."""
    return UnitMap(
        k_pass=coeffs.T * np.kron(_L_FROM_R, Z),
        k_click=coeffs.D * np.kron(P0, I2),
    )


@lru_cache(maxsize=256)
def polarization_traversal(photon: str, qd_spin: QubitLabel, coeffs: ScatteringCoefficients) -> Traversal:
    """``|L>`` arm: HWP then unit.  ``|R>`` arm: mirror of transmission ``T``.

    Net pass operator on (pol, spin) is ``T (|R><R| x 1 + |L><L| x Z)``.
    """
    u = unit_map(coeffs)
    l_arm_in = np.kron(X @ P1, I2)  # select |L>, flip to |R> before the unit
    k_pass = coeffs.T * np.kron(P0, I2) + u.k_pass @ l_arm_in
    k_click = u.k_click @ l_arm_in
    return Traversal((QubitLabel(photon, Kind.POL), qd_spin), k_pass, (k_click,))


@lru_cache(maxsize=256)
def spatial_traversal(photon: str, qd_spin: QubitLabel, coeffs: ScatteringCoefficients) -> Traversal:
    """Mode ``x1``: mirror ``T``.  Mode ``x2``: ``|L>`` goes HWP->unit, ``|R>`` goes unit->HWP.

    Net pass operator on (spa, spin) is ``T (|x1><x1| x 1 + |x2><x2| x Z)`` with
    the polarization untouched.  Operators act on (pol, spa, spin).
    """
    u = unit_map(coeffs)
    hwp = np.kron(X, I2)
    x2_pass = u.k_pass @ hwp @ np.kron(P1, I2) + hwp @ u.k_pass @ np.kron(P0, I2)
    clicks = (u.k_click @ hwp @ np.kron(P1, I2), u.k_click @ np.kron(P0, I2))

    def on_x2(op: np.ndarray) -> np.ndarray:
        # (pol, spin) operator -> (pol, spa, spin), restricted to spatial mode x2
        return np.einsum("aebf,cd->acebdf", op.reshape(2, 2, 2, 2), P1).reshape(8, 8)

    k_pass = coeffs.T * np.kron(np.kron(I2, P0), I2) + on_x2(x2_pass)
    targets = (QubitLabel(photon, Kind.POL), QubitLabel(photon, Kind.SPA), qd_spin)
    return Traversal(targets, k_pass, tuple(on_x2(c) for c in clicks))


def apply_kraus(matrix: np.ndarray, targets: Sequence[QubitLabel], s: RegisterState) -> np.ndarray:
    """Amplitudes of ``matrix`` applied to ``s`` (no norm checks)."""
    k = len(targets)
    axes = [s.index(t) for t in targets]
    op = matrix.reshape((2,) * (2 * k))
    out = np.tensordot(op, s.tensor(), axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes).reshape(-1)


def _weight(amps: np.ndarray) -> float:
    return float(np.vdot(amps, amps).real)


def branch_probabilities(tr: Traversal, s: RegisterState) -> tuple[np.ndarray, float, float, float]:
    """Unnormalized pass amplitudes and the (pass, click, loss) probabilities.

    Probabilities are relative to the input norm.  If the literal coefficients
    push pass + click above one, both are rescaled to sum to one and the loss
    is zero.
    """
    nrm = s.norm_sq
    if nrm <= 0:
        raise ValueError("zero-norm input state")
    pass_amps = apply_kraus(tr.k_pass, tr.targets, s)
    w_pass = _weight(pass_amps) / nrm
    w_click = sum(_weight(apply_kraus(k, tr.targets, s)) for k in tr.k_click) / nrm
    total = w_pass + w_click
    if total > 1.0:
        return pass_amps, w_pass / total, w_click / total, 0.0
    return pass_amps, w_pass, w_click, max(0.0, 1.0 - w_pass - w_click)


def sample_traversal(tr: Traversal, s: RegisterState, rng: np.random.Generator) -> UnitOutcome:
    pass_amps, w_pass, w_click, w_loss = branch_probabilities(tr, s)
    u = rng.random()
    if u < w_pass:
        post = RegisterState(s.labels, pass_amps / np.sqrt(_weight(pass_amps)))
        return UnitOutcome(Branch.PASS, w_pass, post)
    if u < w_pass + w_click:
        return UnitOutcome(Branch.DETECTOR_CLICK, w_click)
    return UnitOutcome(Branch.LOSS, w_loss)


def raw_traversal(photon_pol: QubitLabel, qd_spin: QubitLabel, coeffs: ScatteringCoefficients) -> Traversal:
    u = unit_map(coeffs)
    return Traversal((photon_pol, qd_spin), u.k_pass, (u.k_click,))


def sample_unit(
    photon_pol: QubitLabel,
    qd_spin: QubitLabel,
    s: RegisterState,
    coeffs: ScatteringCoefficients,
    rng: np.random.Generator,
) -> UnitOutcome:
    """Send the photon straight into the unit; it must arrive in ``|R>``."""
    if photon_pol.kind is not Kind.POL or qd_spin.kind is not Kind.SPIN:
        raise ValueError("sample_unit needs a polarization qubit and a spin qubit")
    l_weight = _weight(apply_kraus(P1, [photon_pol], s))
    if l_weight > 1e-12 * s.norm_sq:
        raise ValueError("the raw unit accepts only |R> photons; wire an HWP in front of |L> arms")
    return sample_traversal(raw_traversal(photon_pol, qd_spin, coeffs), s, rng)
