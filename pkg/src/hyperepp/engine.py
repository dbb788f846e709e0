"""Vectorized trajectory engine for Monte-Carlo purification runs.

A :class:`Batch` holds ``B`` independent trajectories on the same qubit
labels, one amplitude row each.  Every trajectory sees the same circuit; what
differs per row is the sampled input, the heralded failures, measurement
outcomes and the classically controlled corrections, which are applied with
row masks.  Kraus operators come from :mod:`hyperepp.unit`, so the wiring is
shared with the per-trajectory reference path in :mod:`hyperepp.protocol`.

Random numbers are drawn per chunk of rounds: chunk ``k`` always covers the
same round indices and uses stream ``(seed, ROUND, k)``, which keeps results
independent of the number of workers.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import rng as rngmod
from .gadgets import ANCILLA
from .optics import ScatteringCoefficients
from .state import (
    H,
    X,
    Z,
    Basis,
    Bell,
    HyperBellLabel,
    Kind,
    QubitLabel,
    make_bell_pair,
    pol,
    spa,
    tensor,
)
from .unit import Traversal, polarization_traversal, spatial_traversal

CHUNK = 1024

_S = 1 / np.sqrt(2)
_BASIS_ROWS = {
    Basis.COMPUTATIONAL: np.eye(2, dtype=complex),
    Basis.DIAGONAL: np.array([[_S, _S], [_S, -_S]], dtype=complex),
}
_PHI_PLUS_SPIN = np.array([_S, _S], dtype=complex)

# branch codes stored per row
ALIVE, CLICK, LOSS = 0, 1, 2


class Batch:
    """``B`` trajectories sharing one sorted label layout."""

    def __init__(self, labels: Sequence[QubitLabel], amps: np.ndarray):
        labels = tuple(labels)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate qubit labels")
        amps = np.array(amps, dtype=complex)  # own copy; rows are updated in place
        if amps.ndim != 2 or amps.shape[1] != 2 ** len(labels):
            raise ValueError(f"amplitudes must have shape (B, {2 ** len(labels)})")
        order = sorted(range(len(labels)), key=lambda i: labels[i])
        if order != list(range(len(labels))):
            t = amps.reshape((amps.shape[0],) + (2,) * len(labels))
            amps = t.transpose([0] + [i + 1 for i in order]).reshape(amps.shape)
        self.labels = tuple(labels[i] for i in order)
        self.amps = np.ascontiguousarray(amps)
        self.status = np.full(self.amps.shape[0], ALIVE, dtype=np.int8)

    @property
    def size(self) -> int:
        return self.amps.shape[0]

    @property
    def alive(self) -> np.ndarray:
        return self.status == ALIVE

    def _tensor(self, amps: Optional[np.ndarray] = None) -> np.ndarray:
        a = self.amps if amps is None else amps
        return a.reshape((a.shape[0],) + (2,) * len(self.labels))

    def _axes(self, targets: Sequence[QubitLabel]) -> list[int]:
        return [self.labels.index(t) + 1 for t in targets]

    def _applied(self, matrix: np.ndarray, targets: Sequence[QubitLabel], amps: np.ndarray) -> np.ndarray:
        if len(targets) == 1:
            v = self._split(targets[0], amps)
            out = np.empty_like(v)
            out[:, :, 0] = matrix[0, 0] * v[:, :, 0] + matrix[0, 1] * v[:, :, 1]
            out[:, :, 1] = matrix[1, 0] * v[:, :, 0] + matrix[1, 1] * v[:, :, 1]
            return out.reshape(amps.shape)
        k = len(targets)
        axes = self._axes(targets)
        op = matrix.reshape((2,) * (2 * k))
        out = np.tensordot(op, self._tensor(amps), axes=(list(range(k, 2 * k)), axes))
        # tensordot puts the operator outputs first and the batch axis right after
        out = np.moveaxis(out, list(range(k)) + [k], axes + [0])
        return out.reshape(amps.shape)

    def _split(self, target: QubitLabel, amps: Optional[np.ndarray] = None) -> np.ndarray:
        """View as (B, left, 2, right) around ``target``."""
        a = self.amps if amps is None else amps
        i = self.labels.index(target)
        return a.reshape(a.shape[0], 2**i, 2, 2 ** (len(self.labels) - i - 1))

    def _diagonal(self, matrix: np.ndarray, targets: Sequence[QubitLabel]) -> Optional[np.ndarray]:
        """Full-register diagonal of a diagonal operator, or None if it is not diagonal."""
        d = np.diag(matrix)
        if np.count_nonzero(matrix - np.diag(d)):
            return None
        k, n = len(targets), len(self.labels)
        full = d.reshape((2,) * k + (1,) * (n - k))
        full = np.moveaxis(full, list(range(k)), [a - 1 for a in self._axes(targets)])
        return np.broadcast_to(full, (2,) * n).reshape(-1)

    def apply(self, matrix: np.ndarray, targets: Sequence[QubitLabel], where: Optional[np.ndarray] = None) -> None:
        if where is None:
            self.amps = self._applied(matrix, targets, self.amps)
        elif where.any():
            self.amps[where] = self._applied(matrix, targets, self.amps[where])

    def swap(self, a: QubitLabel, b: QubitLabel) -> None:
        i, j = self._axes([a, b])
        self.amps = np.ascontiguousarray(np.swapaxes(self._tensor(), i, j)).reshape(self.amps.shape)

    def add_qubit(self, label: QubitLabel, vec: np.ndarray) -> None:
        pos = sum(l < label for l in self.labels)
        v = self.amps.reshape(self.size, 2**pos, 1, -1) * vec.reshape(1, 1, 2, 1)
        self.labels = self.labels[:pos] + (label,) + self.labels[pos:]
        self.amps = v.reshape(self.size, -1)

    def measure_remove(self, target: QubitLabel, basis: Basis, rng: np.random.Generator) -> np.ndarray:
        """Born-sample every row, drop ``target`` and renormalize; returns outcomes."""
        v = self._split(target)
        rows = _BASIS_ROWS[basis].conj()
        proj = [rows[k, 0] * v[:, :, 0] + rows[k, 1] * v[:, :, 1] for k in (0, 1)]
        w0, w1 = (np.einsum("blr,blr->b", p.conj(), p).real for p in proj)
        outcome = (rng.random(self.size) < w1 / (w0 + w1)).astype(np.int8)
        kept = np.where(outcome[:, None, None] == 1, proj[1], proj[0]).reshape(self.size, -1)
        self.amps = kept / np.sqrt(np.where(outcome == 1, w1, w0))[:, None]
        self.labels = tuple(l for l in self.labels if l != target)
        return outcome

    def traverse(self, tr: Traversal, rng: np.random.Generator) -> None:
        """Sample pass / click / loss for every live row; failed rows are frozen."""
        u = rng.random(self.size)
        live = self.alive
        everyone = live.all()
        if not live.any():
            return
        amps = self.amps if everyone else self.amps[live]
        prob = (amps.real**2 + amps.imag**2)
        nrm = prob.sum(axis=1)
        d_pass = self._diagonal(tr.k_pass, tr.targets)
        gram = sum(k.conj().T @ k for k in tr.k_click)
        d_click = self._diagonal(gram, tr.targets)
        if d_pass is None or d_click is None:
            passed = self._applied(tr.k_pass, tr.targets, amps)
            w_pass = np.sum(np.abs(passed) ** 2, axis=1) / nrm
            w_click = sum(np.sum(np.abs(self._applied(k, tr.targets, amps)) ** 2, axis=1) for k in tr.k_click) / nrm
        else:
            passed = amps * d_pass
            w_pass = prob @ (np.abs(d_pass) ** 2) / nrm
            w_click = prob @ d_click.real / nrm
        # literal coefficients may give pass + click > 1; rescale, no loss then
        total = np.maximum(w_pass + w_click, 1.0)
        w_pass, w_click = w_pass / total, w_click / total
        ul = u if everyone else u[live]
        ok = ul < w_pass
        code = np.where(ok, ALIVE, np.where(ul < w_pass + w_click, CLICK, LOSS)).astype(np.int8)
        scale = np.where(ok, 1.0 / np.sqrt(np.maximum(w_pass * total * nrm, 1e-300)), 1.0)
        # failed rows keep their last state
        new = np.where(ok[:, None], passed, amps) * scale[:, None]
        if everyone:
            self.amps = new
            self.status = code
        else:
            self.amps[live] = new
            self.status[live] = code

    def dof_fidelity(self, photons: tuple[str, str], kind: Kind, bell: Bell = Bell.PHI_PLUS) -> np.ndarray:
        """Per-row fidelity of one DOF of a photon pair, other qubits traced out."""
        axes = self._axes([QubitLabel(photons[0], kind), QubitLabel(photons[1], kind)])
        t = np.moveaxis(self._tensor(), axes, [1, 2]).reshape(self.size, 4, -1)
        overlap = np.einsum("i,bir->br", bell.vector.conj(), t)
        return np.sum(np.abs(overlap) ** 2, axis=1) / np.sum(np.abs(t) ** 2, axis=(1, 2))


def _qnd(b: Batch, kind: Kind, photons: tuple[str, str], coeffs: ScatteringCoefficients, rng) -> np.ndarray:
    build = polarization_traversal if kind is Kind.POL else spatial_traversal
    b.add_qubit(ANCILLA, _PHI_PLUS_SPIN)
    for p in photons:
        b.traverse(build(p, ANCILLA, coeffs), rng)
    return b.measure_remove(ANCILLA, Basis.DIAGONAL, rng)


def _swap_pp(b: Batch, pa: str, pa2: str, coeffs: ScatteringCoefficients, rng) -> None:
    b.add_qubit(ANCILLA, _PHI_PLUS_SPIN)
    trs = [polarization_traversal(p, ANCILLA, coeffs) for p in (pa, pa2)]
    for _ in range(2):
        for tr in trs:
            b.traverse(tr, rng)
        b.apply(H, [pol(pa)])
        b.apply(H, [pol(pa2)])
        b.apply(H, [ANCILLA])
    down = b.measure_remove(ANCILLA, Basis.COMPUTATIONAL, rng) == 1
    b.apply(Z, [pol(pa)], where=down)
    b.apply(Z, [pol(pa2)], where=down)


def _swap_ss(b: Batch, pa: str, pa2: str, coeffs: ScatteringCoefficients, rng) -> None:
    for p in (pa, pa2):
        b.swap(pol(p), spa(p))
    _swap_pp(b, pa, pa2, coeffs, rng)
    for p in (pa, pa2):
        b.swap(pol(p), spa(p))


# the 16 four-photon inputs, indexed by bits (pol_AB, spa_AB, pol_CD, spa_CD), 1 = psi+
def _input_table() -> tuple[tuple[QubitLabel, ...], np.ndarray]:
    rows = []
    labels = None
    for idx in range(16):
        bits = [(idx >> k) & 1 for k in (3, 2, 1, 0)]
        bell = [Bell.PSI_PLUS if x else Bell.PHI_PLUS for x in bits]
        s = tensor(
            make_bell_pair(HyperBellLabel(bell[0], bell[1]), ("A", "B")),
            make_bell_pair(HyperBellLabel(bell[2], bell[3]), ("C", "D")),
        )
        labels = s.labels
        rows.append(s.amplitudes)
    return labels, np.array(rows)


_INPUT_LABELS, _INPUT_ROWS = _input_table()


def input_index(ab: HyperBellLabel, cd: HyperBellLabel) -> int:
    bits = [ab.pol, ab.spa, cd.pol, cd.spa]
    for x in bits:
        if x not in (Bell.PHI_PLUS, Bell.PSI_PLUS):
            raise ValueError("bit-flip mixtures only contain phi+ and psi+")
    return sum((x is Bell.PSI_PLUS) << k for x, k in zip(bits, (3, 2, 1, 0)))


@dataclass
class Step1Batch:
    """Per-row results of step 1; ``case`` is 0 where a gadget failed."""

    inputs: np.ndarray
    case: np.ndarray
    failure: np.ndarray
    f_pol: np.ndarray
    f_spa: np.ndarray
    pair_amps: np.ndarray  # (B, 16) register of A, B after step 1


def step1_batch(inputs: np.ndarray, coeffs: ScatteringCoefficients, rng: np.random.Generator) -> Step1Batch:
    """Run step 1 on the given input indices (see :func:`input_index`)."""
    b = Batch(_INPUT_LABELS, _INPUT_ROWS[inputs])
    par = {}
    for side, photons in (("AC", ("A", "C")), ("BD", ("B", "D"))):
        for kind in (Kind.POL, Kind.SPA):
            par[side, kind] = _qnd(b, kind, photons, coeffs, rng)
    same_pol = par["AC", Kind.POL] == par["BD", Kind.POL]
    same_spa = par["AC", Kind.SPA] == par["BD", Kind.SPA]
    case = np.select(
        [same_pol & same_spa, ~same_pol & ~same_spa, ~same_pol & same_spa],
        [1, 2, 3],
        default=4,
    ).astype(np.int8)

    for kind, lab in ((Kind.POL, pol), (Kind.SPA, spa)):
        odd = par["AC", kind] == 1
        b.apply(X, [lab("C")], where=odd)
        b.apply(X, [lab("D")], where=odd)
    for p in ("C", "D"):
        b.apply(H, [pol(p)])
        b.apply(H, [spa(p)])
    for lab in (pol, spa):
        mc = b.measure_remove(lab("C"), Basis.COMPUTATIONAL, rng)
        md = b.measure_remove(lab("D"), Basis.COMPUTATIONAL, rng)
        b.apply(Z, [lab("B")], where=mc != md)

    failed = ~b.alive
    case[failed] = 0
    return Step1Batch(
        inputs=inputs,
        case=case,
        failure=b.status.copy(),
        f_pol=b.dof_fidelity(("A", "B"), Kind.POL),
        f_spa=b.dof_fidelity(("A", "B"), Kind.SPA),
        pair_amps=b.amps,
    )


def _sample_inputs(F1: float, F2: float, n: int, rng: np.random.Generator) -> np.ndarray:
    u = rng.random((n, 4))
    bits = (u >= np.array([F1, F2, F1, F2])).astype(np.int64)
    return bits @ np.array([8, 4, 2, 1])


def _step1_chunk(args) -> Step1Batch:
    F1, F2, coeffs, seed, k, n = args
    rng = rngmod.stream(seed, rngmod.ROUND, k)
    return step1_batch(_sample_inputs(F1, F2, n, rng), coeffs, rng)


def step2_batch(
    ab_amps: np.ndarray, a2b2_amps: np.ndarray, into_ab: bool, coeffs: ScatteringCoefficients, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pump matched survivor pairs; returns (success, f_pol, f_spa) of the kept pair."""
    ab_labels = tuple(QubitLabel(o, k) for o in ("A", "B") for k in (Kind.POL, Kind.SPA))
    primed = tuple(QubitLabel(o, k) for o in ("A'", "B'") for k in (Kind.POL, Kind.SPA))
    amps = np.einsum("bi,bj->bij", ab_amps, a2b2_amps).reshape(len(ab_amps), -1)
    b = Batch(ab_labels + primed, amps)
    swap = _swap_pp if into_ab else _swap_ss
    swap(b, "A", "A'", coeffs, rng)
    swap(b, "B", "B'", coeffs, rng)
    keep = ("A", "B") if into_ab else ("A'", "B'")
    return b.alive, b.dof_fidelity(keep, Kind.POL), b.dof_fidelity(keep, Kind.SPA)


def _step2_chunk(args):
    ab, a2b2, into_ab, coeffs, seed, k = args
    return step2_batch(ab, a2b2, into_ab, coeffs, rngmod.stream(seed, rngmod.PUMP, k))


def _map(fn, jobs: list, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


@dataclass
class RunArrays:
    """Concatenated per-round and per-pump results of one Monte-Carlo run."""

    step1: Step1Batch
    pump_success: np.ndarray
    pump_f_pol: np.ndarray
    pump_f_spa: np.ndarray


def run(
    F1: float,
    F2: float,
    coeffs: ScatteringCoefficients,
    n: int,
    seed: int,
    into_ab: bool = True,
    use_step2: bool = True,
    workers: int = 1,
    chunk: int = CHUNK,
) -> RunArrays:
    if n < 1:
        raise ValueError("need at least one round")
    jobs = [(F1, F2, coeffs, seed, k, min(chunk, n - lo)) for k, lo in enumerate(range(0, n, chunk))]
    parts = _map(_step1_chunk, jobs, workers)
    s1 = Step1Batch(*(np.concatenate([getattr(p, f) for p in parts]) for f in Step1Batch.__dataclass_fields__))
    empty = np.zeros(0)
    if not use_step2:
        return RunArrays(s1, empty.astype(bool), empty, empty)
    # FIFO matching: the k-th case-3 survivor meets the k-th case-4 survivor
    i3 = np.flatnonzero(s1.case == 3)
    i4 = np.flatnonzero(s1.case == 4)
    m = min(len(i3), len(i4))
    i3, i4 = i3[:m], i4[:m]
    jobs = [
        (s1.pair_amps[i3[lo : lo + chunk]], s1.pair_amps[i4[lo : lo + chunk]], into_ab, coeffs, seed, k)
        for k, lo in enumerate(range(0, m, chunk))
    ]
    res = _map(_step2_chunk, jobs, workers)
    if not res:
        return RunArrays(s1, empty.astype(bool), empty, empty)
    ok, fp, fs = (np.concatenate(x) for x in zip(*res))
    return RunArrays(s1, ok, fp, fs)
