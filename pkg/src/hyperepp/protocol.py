"""Two-step hyperentanglement purification of bit-flip errors.

Step 1 (per round, four photons): Alice checks the polarization and spatial
parities of ``A, C``, Bob those of ``B, D``.  Comparing the two sides sorts
the round into one of four cases:

====  ============  =========  ===================================
case  polarization  spatial    fate of pair AB
====  ============  =========  ===================================
1     same          same       kept, purified in both DOFs
2     different     different  discarded
3     different     same       reserved, spatial DOF purified
4     same          different  reserved, polarization DOF purified
====  ============  =========  ===================================

Photons ``C, D`` are then bit-flipped (when the AC parity is odd), rotated by
Hadamards in both DOFs and detected; an odd C/D result is fixed by a phase
flip on ``B``.

Step 2 pairs a case-3 survivor with a case-4 survivor and moves the good
polarization state onto the case-3 pair (P-P SWAPs) or the good spatial state
onto the case-4 pair (S-S SWAPs).  Survivors are matched first-in first-out;
any left unmatched when the batch ends are discarded.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import enum
import math
from typing import Optional

import numpy as np

from . import engine as vec
from . import rng as rngmod
from .gadgets import Parity, parity_qnd_pol, parity_qnd_spa, swap_pp, swap_ss
from .optics import ScatteringCoefficients
from .state import (
    Basis,
    Bell,
    HyperBellLabel,
    Kind,
    RegisterState,
    SingleOp,
    apply_single,
    discard,
    dof_fidelity,
    make_bell_pair,
    measure_and_remove,
    pair_labels,
    pol,
    rename,
    spa,
    tensor,
)

PHOTONS = ("A", "B", "C", "D")
PRIMED = {"A": "A'", "B": "B'"}


@dataclass(frozen=True)
class MixtureSpec:
    """Per-DOF probabilities of the error-free Bell state ``|phi+>``."""

    F1: float
    F2: float

    def __post_init__(self) -> None:
        for name in ("F1", "F2"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


class Case(enum.IntEnum):
    CASE1_SAME_SAME = 1
    CASE2_DIFF_DIFF = 2
    CASE3_DIFF_POL_SAME_SPA = 3
    CASE4_SAME_POL_DIFF_SPA = 4


class Arrangement(enum.Enum):
    PUMP_INTO_AB = "ab"
    PUMP_INTO_A2B2 = "a2b2"


def classify(ac_pol: Parity, bd_pol: Parity, ac_spa: Parity, bd_spa: Parity) -> Case:
    same_pol = ac_pol is bd_pol
    same_spa = ac_spa is bd_spa
    if same_pol and same_spa:
        return Case.CASE1_SAME_SAME
    if not same_pol and not same_spa:
        return Case.CASE2_DIFF_DIFF
    if same_spa:
        return Case.CASE3_DIFF_POL_SAME_SPA
    return Case.CASE4_SAME_POL_DIFF_SPA


def sample_pair(
    m: MixtureSpec, photons: tuple[str, str], rng: np.random.Generator
) -> tuple[HyperBellLabel, RegisterState]:
    p = Bell.PHI_PLUS if rng.random() < m.F1 else Bell.PSI_PLUS
    s = Bell.PHI_PLUS if rng.random() < m.F2 else Bell.PSI_PLUS
    label = HyperBellLabel(p, s)
    return label, make_bell_pair(label, photons)


@dataclass(frozen=True)
class Step1Result:
    success: bool
    case: Optional[Case] = None
    kept: bool = False
    state: Optional[RegisterState] = None
    corrections: tuple[str, ...] = ()


def step1(
    pair_ab: RegisterState,
    pair_cd: RegisterState,
    coeffs: ScatteringCoefficients,
    rng: np.random.Generator,
) -> Step1Result:
    """Parity checks, case sorting and readout of ``C, D``.

    Returns the corrected two-photon register of ``A, B`` unless the round is
    case 2 or a gadget failed.  Cases 3 and 4 come back with ``kept=True`` and
    still need step 2.
    """
    a, b, c, d = PHOTONS
    s = tensor(pair_ab, pair_cd)
    parities = {}
    for (p1, p2), side in (((a, c), "AC"), ((b, d), "BD")):
        for kind, qnd in ((Kind.POL, parity_qnd_pol), (Kind.SPA, parity_qnd_spa)):
            outcome, s = qnd(p1, p2, s, coeffs, rng)
            if not outcome.success:
                return Step1Result(success=False)
            parities[side, kind] = outcome.parity
    case = classify(parities["AC", Kind.POL], parities["BD", Kind.POL], parities["AC", Kind.SPA], parities["BD", Kind.SPA])

    corrections = []
    flips = {Kind.POL: (SingleOp.HWP_X, pol), Kind.SPA: (SingleOp.BIT_X_SPA, spa)}
    for kind, (op, lab) in flips.items():
        if parities["AC", kind] is Parity.ODD:
            for p in (c, d):
                s = apply_single(op, lab(p), s)
                corrections.append(f"{op.value}({p})")

    for p in (c, d):
        s = apply_single(SingleOp.H_POL, pol(p), s)
        s = apply_single(SingleOp.H_SPA, spa(p), s)

    phase = {Kind.POL: (SingleOp.PHASE_Z_POL, pol), Kind.SPA: (SingleOp.PHASE_Z_SPA, spa)}
    for kind, (op, lab) in phase.items():
        bc, s, _ = measure_and_remove(lab(c), Basis.COMPUTATIONAL, s, rng)
        bd, s, _ = measure_and_remove(lab(d), Basis.COMPUTATIONAL, s, rng)
        if bc != bd:
            s = apply_single(op, lab(b), s)
            corrections.append(f"{op.value}({b})")

    kept = case is not Case.CASE2_DIFF_DIFF
    return Step1Result(True, case, kept, s if kept else None, tuple(corrections))


def step2(
    pair_ab: RegisterState,
    pair_a2b2: RegisterState,
    arrangement: Arrangement,
    coeffs: ScatteringCoefficients,
    rng: np.random.Generator,
) -> tuple[Optional[RegisterState], bool]:
    """Pump the good DOFs of two reserved pairs into one pair.

    ``pair_ab`` is the case-3 survivor (good spatial DOF) on photons ``A, B``;
    ``pair_a2b2`` is the case-4 survivor (good polarization) on photons
    ``A', B'``.  The kept pair is returned relabeled to ``A, B``.
    """
    a, b = "A", "B"
    a2, b2 = PRIMED[a], PRIMED[b]
    s = tensor(pair_ab, pair_a2b2)
    swap = swap_pp if arrangement is Arrangement.PUMP_INTO_AB else swap_ss
    for p, q in ((a, a2), (b, b2)):
        outcome, s = swap(p, q, s, coeffs, rng)
        if not outcome.success:
            return None, False
    if arrangement is Arrangement.PUMP_INTO_AB:
        return discard(pair_labels((a2, b2)), s, rng), True
    s = discard(pair_labels((a, b)), s, rng)
    return rename(s, {a2: a, b2: b}), True


def fidelity_update(F: float) -> float:
    """One purification round for a single DOF: ``F^2 / (F^2 + (1-F)^2)``."""
    if not 0 < F <= 1:
        raise ValueError(f"fidelity must lie in (0, 1], got {F}")
    return F * F / (F * F + (1 - F) ** 2)


def yields(F1: float, F2: float) -> tuple[float, float]:
    """Pairs obtained per round with step 1 only (Y1) and with pumping (Y2)."""
    for F in (F1, F2):
        if not 0 < F <= 1:
            raise ValueError(f"fidelity must lie in (0, 1], got {F}")
    same1 = F1**2 + (1 - F1) ** 2
    same2 = F2**2 + (1 - F2) ** 2
    y1 = same1 * same2
    y2 = y1 + min(same1 * 2 * F2 * (1 - F2), 2 * F1 * (1 - F1) * same2)
    return y1, y2


def iterate_rounds(m: MixtureSpec, N: int) -> list[tuple[float, float, float]]:
    """``(F1, F2, F1*F2)`` after 0, 1, ..., N rounds."""
    if N < 0:
        raise ValueError("N must be >= 0")
    F1, F2 = m.F1, m.F2
    out = [(F1, F2, F1 * F2)]
    for _ in range(N):
        F1, F2 = fidelity_update(F1), fidelity_update(F2)
        out.append((F1, F2, F1 * F2))
    return out


def detector_scaled_yield(Y: float, eta_d: float) -> float:
    if not 0 <= eta_d <= 1:
        raise ValueError("eta_d must lie in [0, 1]")
    return Y * eta_d**2


def decoherence_fidelity(dt: float, T2e: float) -> float:
    """Spin-decoherence fidelity ``[1 + exp(-dt/T2e)] / 2``."""
    if dt < 0 or T2e <= 0:
        raise ValueError("need dt >= 0 and T2e > 0")
    return (1 + math.exp(-dt / T2e)) / 2


@dataclass(frozen=True)
class RoundOutcome:
    """One step-1 round on two freshly sampled pairs.

    ``kept`` is set for case 1 only; cases 3 and 4 leave their pair in
    ``reserved`` for step 2.
    """

    success: bool
    case: Optional[Case]
    kept: bool
    corrections: tuple[str, ...] = ()
    step2_used: bool = False
    final_pair_state: Optional[RegisterState] = None
    reserved: Optional[RegisterState] = None
    resources: int = 2
    inputs: tuple[HyperBellLabel, HyperBellLabel] = field(default=None, repr=False)


def run_round(m: MixtureSpec, coeffs: ScatteringCoefficients, rng: np.random.Generator) -> RoundOutcome:
    lab_ab, ab = sample_pair(m, ("A", "B"), rng)
    lab_cd, cd = sample_pair(m, ("C", "D"), rng)
    r = step1(ab, cd, coeffs, rng)
    inputs = (lab_ab, lab_cd)
    if not r.success:
        return RoundOutcome(False, None, False, inputs=inputs)
    if r.case is Case.CASE1_SAME_SAME:
        return RoundOutcome(True, r.case, True, r.corrections, final_pair_state=r.state, inputs=inputs)
    reserved = r.state if r.case in (Case.CASE3_DIFF_POL_SAME_SPA, Case.CASE4_SAME_POL_DIFF_SPA) else None
    return RoundOutcome(True, r.case, False, r.corrections, reserved=reserved, inputs=inputs)


def _round_chunk(args) -> list[RoundOutcome]:
    m, coeffs, seed, start, stop = args
    return [run_round(m, coeffs, rngmod.stream(seed, rngmod.ROUND, i)) for i in range(start, stop)]


def simulate_rounds(
    m: MixtureSpec, coeffs: ScatteringCoefficients, n: int, seed: int, workers: int = 1
) -> list[RoundOutcome]:
    """Run ``n`` independent rounds; the result does not depend on ``workers``."""
    if n < 1:
        raise ValueError("need at least one round")
    if workers <= 1:
        return _round_chunk((m, coeffs, seed, 0, n))
    bounds = np.linspace(0, n, min(workers * 4, n) + 1).astype(int)
    jobs = [(m, coeffs, seed, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunks = list(pool.map(_round_chunk, jobs))
    return [r for chunk in chunks for r in chunk]


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    count: int

    @classmethod
    def proportion(cls, hits: int, n: int) -> "Estimate":
        if n == 0:
            return cls(math.nan, math.nan, 0)
        p = hits / n
        return cls(p, math.sqrt(p * (1 - p) / n), n)

    @classmethod
    def mean(cls, values) -> "Estimate":
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return cls(math.nan, math.nan, 0)
        return cls(float(v.mean()), float(v.std() / math.sqrt(v.size)), int(v.size))

    def within(self, expected: float, sigmas: float = 3.0) -> bool:
        if self.stderr == 0:
            return abs(self.value - expected) <= 1e-12
        return abs(self.value - expected) <= sigmas * self.stderr


@dataclass(frozen=True)
class YieldReport:
    samples: int
    case_counts: dict
    step1_failures: int
    pump_attempts: int
    pump_successes: int
    Y1: Estimate
    Y2: Estimate
    F1_case1: Estimate
    F2_case1: Estimate
    F1_out: Estimate
    F2_out: Estimate


def pair_survivors(outcomes: list[RoundOutcome]) -> list[tuple[int, int]]:
    """FIFO matching of case-3 and case-4 rounds, as (case-3 index, case-4 index)."""
    q3: list[int] = []
    q4: list[int] = []
    pairs = []
    for i, o in enumerate(outcomes):
        if o.reserved is None:
            continue
        (q3 if o.case is Case.CASE3_DIFF_POL_SAME_SPA else q4).append(i)
        if q3 and q4:
            pairs.append((q3.pop(0), q4.pop(0)))
    return pairs


def pump(
    outcomes: list[RoundOutcome],
    coeffs: ScatteringCoefficients,
    seed: int,
    arrangement: Arrangement = Arrangement.PUMP_INTO_AB,
) -> list[Optional[RegisterState]]:
    """Run step 2 on every FIFO-matched survivor pair; ``None`` marks a failed pump."""
    results = []
    for k, (i3, i4) in enumerate(pair_survivors(outcomes)):
        a2b2 = rename(outcomes[i4].reserved, PRIMED)
        state, ok = step2(outcomes[i3].reserved, a2b2, arrangement, coeffs, rngmod.stream(seed, rngmod.PUMP, k))
        results.append(state if ok else None)
    return results


ENGINES = ("vectorized", "reference")


def run_batch(
    m: MixtureSpec,
    coeffs: ScatteringCoefficients,
    n: int,
    seed: int,
    arrangement: Arrangement = Arrangement.PUMP_INTO_AB,
    use_step2: bool = True,
    workers: int = 1,
    engine: str = "vectorized",
) -> YieldReport:
    """Monte-Carlo estimate of yields and purified fidelities over ``n`` rounds.

    ``engine="reference"`` runs one trajectory at a time through the gadget
    functions; the default pushes whole chunks of rounds through
    :mod:`hyperepp.engine`.  Both sample the same distribution but consume
    random numbers differently.
    """
    if engine == "reference":
        outcomes = simulate_rounds(m, coeffs, n, seed, workers)
        return summarize(outcomes, pump(outcomes, coeffs, seed, arrangement) if use_step2 else [])
    if engine != "vectorized":
        raise ValueError(f"engine must be one of {ENGINES}")
    into_ab = arrangement is Arrangement.PUMP_INTO_AB
    r = vec.run(m.F1, m.F2, coeffs, n, seed, into_ab=into_ab, use_step2=use_step2, workers=workers)
    return summarize_arrays(r)


def summarize_arrays(r: "vec.RunArrays") -> YieldReport:
    s1 = r.step1
    n = len(s1.case)
    kept = s1.case == 1
    ok = r.pump_success
    f1_out = np.concatenate([s1.f_pol[kept], r.pump_f_pol[ok]])
    f2_out = np.concatenate([s1.f_spa[kept], r.pump_f_spa[ok]])
    return YieldReport(
        samples=n,
        case_counts={c: int(np.sum(s1.case == c.value)) for c in Case},
        step1_failures=int(np.sum(s1.case == 0)),
        pump_attempts=len(ok),
        pump_successes=int(ok.sum()),
        Y1=Estimate.proportion(int(kept.sum()), n),
        Y2=Estimate.proportion(len(f1_out), n),
        F1_case1=Estimate.mean(s1.f_pol[kept]),
        F2_case1=Estimate.mean(s1.f_spa[kept]),
        F1_out=Estimate.mean(f1_out),
        F2_out=Estimate.mean(f2_out),
    )


def summarize(outcomes: list[RoundOutcome], pumped: list[Optional[RegisterState]]) -> YieldReport:
    n = len(outcomes)
    counts = {c: 0 for c in Case}
    failures = 0
    case1_states = []
    for o in outcomes:
        if not o.success:
            failures += 1
            continue
        counts[o.case] += 1
        if o.kept:
            case1_states.append(o.final_pair_state)
    good_pumped = [s for s in pumped if s is not None]
    final = case1_states + good_pumped
    ab = ("A", "B")
    return YieldReport(
        samples=n,
        case_counts=counts,
        step1_failures=failures,
        pump_attempts=len(pumped),
        pump_successes=len(good_pumped),
        Y1=Estimate.proportion(len(case1_states), n),
        Y2=Estimate.proportion(len(final), n),
        F1_case1=Estimate.mean([dof_fidelity(s, ab, Kind.POL) for s in case1_states]),
        F2_case1=Estimate.mean([dof_fidelity(s, ab, Kind.SPA) for s in case1_states]),
        F1_out=Estimate.mean([dof_fidelity(s, ab, Kind.POL) for s in final]),
        F2_out=Estimate.mean([dof_fidelity(s, ab, Kind.SPA) for s in final]),
    )
