import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperepp import engine
from hyperepp.engine import ALIVE, Batch, input_index, step1_batch
from hyperepp.optics import ScatteringCoefficients, ScatteringParams, branch_amplitudes
from hyperepp.protocol import step1
from hyperepp.rng import stream
from hyperepp.state import (
    X,
    Basis,
    Bell,
    HyperBellLabel,
    Kind,
    apply_matrix,
    dof_fidelity,
    make_bell_pair,
    make_state,
    outcome_probabilities,
    pol,
    spa,
    spin,
    swap_qubits,
    tensor,
)
from hyperepp.unit import branch_probabilities, polarization_traversal, spatial_traversal

REF = branch_amplitudes(ScatteringParams.resonant(2.0, kappa_s=0.2, gamma=0.1))
LABELS = [pol("A"), spa("A"), pol("B"), spa("B")]


def random_rows(seed, n, k):
    rng = stream(seed)
    v = rng.normal(size=(n, 2**k)) + 1j * rng.normal(size=(n, 2**k))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def test_constructor_sorts_labels():
    rows = random_rows(0, 3, 4)
    shuffled = [spa("B"), pol("A"), spa("A"), pol("B")]
    b = Batch(shuffled, rows)
    for i in range(3):
        ref = make_state(shuffled, rows[i])
        assert b.labels == ref.labels
        assert np.allclose(b.amps[i], ref.amplitudes)
    with pytest.raises(ValueError):
        Batch(LABELS, rows[:, :8])
    with pytest.raises(ValueError):
        Batch([pol("A"), pol("A")], rows[:, :4])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([[pol("A")], [spa("B")], [pol("B"), spa("A")], [spa("B"), pol("A")]]))
def test_apply_matches_the_register_version(seed, targets):
    rows = random_rows(seed, 4, 4)
    k = len(targets)
    m = random_rows(seed + 1, 2**k, k)  # any matrix will do
    b = Batch(LABELS, rows)
    b.apply(m, targets)
    for i in range(4):
        ref = apply_matrix(m / 4, targets, make_state(LABELS, rows[i]))
        assert np.allclose(b.amps[i] / 4, ref.amplitudes, atol=1e-12)


def test_masked_apply_and_swap():
    rows = random_rows(1, 4, 4)
    b = Batch(LABELS, rows)
    assert not np.shares_memory(b.amps, rows)
    where = np.array([True, False, True, False])
    b.apply(X, [pol("A")], where=where)
    for i in range(4):
        s = make_state(LABELS, rows[i])
        want = apply_matrix(X, [pol("A")], s) if where[i] else s
        assert np.allclose(b.amps[i], want.amplitudes)
    b = Batch(LABELS, rows)
    b.swap(pol("A"), spa("B"))
    assert np.allclose(b.amps[2], swap_qubits(pol("A"), spa("B"), make_state(LABELS, rows[2])).amplitudes)


def test_add_qubit_inserts_in_label_order():
    rows = random_rows(2, 2, 4)
    b = Batch(LABELS, rows)
    vec = np.array([0.6, 0.8j])
    b.add_qubit(spa("A'"), vec)
    ref = tensor(make_state(LABELS, rows[1]), make_state([spa("A'")], vec))
    assert b.labels == ref.labels and np.allclose(b.amps[1], ref.amplitudes)


def test_measure_remove_statistics_and_collapse():
    n = 50_000
    s = make_state([pol("A"), spin("q")], np.array([0.6, 0, 0, 0.8]))
    b = Batch(s.labels, np.tile(s.amplitudes, (n, 1)))
    out = b.measure_remove(spin("q"), Basis.COMPUTATIONAL, stream(3))
    assert abs(out.mean() - 0.64) <= 3 * np.sqrt(0.64 * 0.36 / n)
    assert b.labels == (pol("A"),)
    assert np.allclose(np.abs(b.amps), np.where(out[:, None] == 1, [0, 1], [1, 0]))
    # product state: spin (0.6, 0.8) gives phi+ with probability (0.6 + 0.8)^2 / 2
    s = make_state([pol("A"), spin("q")], np.array([0.6, 0.8, 0, 0]))
    assert outcome_probabilities(spin("q"), Basis.DIAGONAL, s) == pytest.approx([0.98, 0.02])
    d = Batch(s.labels, np.tile(s.amplitudes, (n, 1)))
    out = d.measure_remove(spin("q"), Basis.DIAGONAL, stream(4))
    assert abs(out.mean() - 0.02) <= 3 * np.sqrt(0.02 * 0.98 / n)
    assert np.allclose(np.abs(d.amps), [1, 0])  # the phi- outcome leaves a sign


@pytest.mark.parametrize("build", [polarization_traversal, spatial_traversal])
def test_traverse_matches_branch_weights(build):
    n = 40_000
    s = make_state(LABELS + [spin("q")], random_rows(5, 1, 5)[0])
    tr = build("A", spin("q"), REF)
    _, w_pass, w_click, _ = branch_probabilities(tr, s)
    b = Batch(s.labels, np.tile(s.amplitudes, (n, 1)))
    b.traverse(tr, stream(6))
    for code, w in ((ALIVE, w_pass), (engine.CLICK, w_click)):
        freq = np.mean(b.status == code)
        assert abs(freq - w) <= 3 * np.sqrt(w * (1 - w) / n) + 1e-12
    alive = b.alive
    assert np.allclose(np.linalg.norm(b.amps[alive], axis=1), 1)
    # every surviving row holds the same renormalized pass state
    passed = apply_matrix(tr.k_pass, tr.targets, s).amplitudes
    assert np.allclose(b.amps[alive], passed / np.linalg.norm(passed))


def test_failed_rows_stay_frozen():
    dead = ScatteringCoefficients.from_branches(0.0, 1.0)
    s = make_state([pol("A"), spa("A"), spin("q")], random_rows(7, 1, 3)[0])
    b = Batch(s.labels, np.tile(s.amplitudes, (3, 1)))
    b.traverse(polarization_traversal("A", spin("q"), dead), stream(0))
    assert not b.alive.any()
    before = b.amps.copy()
    b.traverse(polarization_traversal("A", spin("q"), REF), stream(1))
    assert np.array_equal(b.amps, before) and not b.alive.any()


def test_dof_fidelity_per_row():
    s = tensor(make_bell_pair(HyperBellLabel(Bell.PHI_PLUS, Bell.PSI_PLUS), ("A", "B")), make_state([spin("q")], [0.6, 0.8]))
    b = Batch(s.labels, np.tile(s.amplitudes, (2, 1)))
    assert np.allclose(b.dof_fidelity(("A", "B"), Kind.POL), 1)
    assert np.allclose(b.dof_fidelity(("A", "B"), Kind.SPA), 0)
    assert np.allclose(b.dof_fidelity(("A", "B"), Kind.SPA, Bell.PSI_PLUS), 1)


def test_input_index():
    P, Q = Bell.PHI_PLUS, Bell.PSI_PLUS
    assert input_index(HyperBellLabel(P, P), HyperBellLabel(P, P)) == 0
    assert input_index(HyperBellLabel(Q, P), HyperBellLabel(P, Q)) == 0b1001
    with pytest.raises(ValueError):
        input_index(HyperBellLabel(Bell.PHI_MINUS, P), HyperBellLabel(P, P))


@pytest.mark.parametrize("coeffs", [ScatteringCoefficients.ideal(), REF], ids=["ideal", "reference"])
def test_step1_batch_agrees_with_the_reference_step(coeffs):
    P, Q = Bell.PHI_PLUS, Bell.PSI_PLUS
    inputs = np.repeat(np.arange(16), 8)
    r = step1_batch(inputs, coeffs, stream(11))
    assert set(np.unique(r.case[r.case > 0])) <= {1, 2, 3, 4}
    for idx in range(16):
        bits = [(idx >> k) & 1 for k in (3, 2, 1, 0)]
        bells = [Q if x else P for x in bits]
        ab, cd = HyperBellLabel(bells[0], bells[1]), HyperBellLabel(bells[2], bells[3])
        for k in range(50):
            ref = step1(make_bell_pair(ab, ("A", "B")), make_bell_pair(cd, ("C", "D")), coeffs, stream(idx, k))
            if ref.success:
                break
        rows = (r.inputs == idx) & (r.case > 0)
        assert np.all(r.case[rows] == int(ref.case))
        if ref.kept:
            want = (dof_fidelity(ref.state, ("A", "B"), Kind.POL), dof_fidelity(ref.state, ("A", "B"), Kind.SPA))
            assert np.allclose(r.f_pol[rows], want[0], atol=1e-10)
            assert np.allclose(r.f_spa[rows], want[1], atol=1e-10)


def test_run_is_reproducible_and_chunk_aligned():
    a = engine.run(0.75, 0.7, REF, 2500, seed=4)
    b = engine.run(0.75, 0.7, REF, 2500, seed=4)
    assert np.array_equal(a.step1.case, b.step1.case) and np.array_equal(a.pump_f_pol, b.pump_f_pol)
    # the first chunk only depends on the seed, not on how many rounds follow it
    c = engine.run(0.75, 0.7, REF, engine.CHUNK, seed=4, use_step2=False)
    assert np.array_equal(a.step1.case[: engine.CHUNK], c.step1.case)
    assert len(c.pump_success) == 0
    assert len(a.pump_success) == min(np.sum(a.step1.case == 3), np.sum(a.step1.case == 4))
    with pytest.raises(ValueError):
        engine.run(0.75, 0.7, REF, 0, seed=4)


def test_pumping_with_ideal_gadgets_always_succeeds():
    for into_ab in (True, False):
        r = engine.run(0.7, 0.7, ScatteringCoefficients.ideal(), 3000, seed=2, into_ab=into_ab)
        assert np.all(r.step1.case != 0) and r.pump_success.all()
        # pure bit-flip inputs stay pure: every pumped DOF is either right or flipped
        assert set(np.unique(np.round(r.pump_f_pol, 10))) <= {0.0, 1.0}
        assert set(np.unique(np.round(r.pump_f_spa, 10))) <= {0.0, 1.0}
