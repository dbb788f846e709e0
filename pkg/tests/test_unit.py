import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hyperepp.optics import ScatteringCoefficients, ScatteringParams, branch_amplitudes
from hyperepp.rng import stream
from hyperepp.state import Z, make_state, pol, spa, spin, tensor, basis_state
from hyperepp.unit import (
    Branch,
    branch_probabilities,
    polarization_traversal,
    raw_traversal,
    sample_traversal,
    sample_unit,
    spatial_traversal,
    unit_map,
)

S = 1 / np.sqrt(2)
PHI_PLUS = np.array([S, S])
PHI_MINUS = np.array([S, -S])
R, L = np.array([1, 0]), np.array([0, 1])
REF = branch_amplitudes(ScatteringParams.resonant(2.0, kappa_s=0.2, gamma=0.1))
Q = spin("q")


def unit_input(photon, spin_vec):
    return make_state([pol("A"), Q], np.kron(photon, spin_vec))


# raw branch operators


@pytest.mark.parametrize("spin_in, spin_out", [(PHI_PLUS, PHI_MINUS), (PHI_MINUS, PHI_PLUS)])
def test_branch_operators_flip_the_spin_phase(spin_in, spin_out):
    c = ScatteringCoefficients.from_branches(0.8, 0.3)
    u = unit_map(c)
    psi = np.kron(R, spin_in)
    assert np.allclose(u.k_pass @ psi, 0.8 * np.kron(L, spin_out))
    assert np.allclose(u.k_click @ psi, 0.3 * np.kron(R, spin_in))


def test_ideal_unit_is_a_unitary_phase_flip():
    u = unit_map(ScatteringCoefficients.ideal())
    assert np.allclose(u.k_click, 0)
    restricted = u.k_pass[2:, :2]  # |R> in, |L> out, acting on the spin
    assert np.allclose(restricted, Z)
    out = sample_unit(pol("A"), Q, unit_input(R, PHI_PLUS), ScatteringCoefficients.ideal(), stream(0))
    assert out.branch is Branch.PASS and out.weight == pytest.approx(1)


def test_reference_branch_probabilities():
    s = unit_input(R, PHI_PLUS)
    _, w_pass, w_click, w_loss = branch_probabilities(raw_traversal(pol("A"), Q, REF), s)
    assert w_pass == pytest.approx(0.84215, abs=1e-5)
    assert w_click == pytest.approx(0.009902, abs=1e-6)
    assert w_loss == pytest.approx(0.14795, abs=1e-5)
    assert w_pass + w_click + w_loss == pytest.approx(1, abs=1e-12)


def test_sampled_frequencies_follow_the_weights():
    s = unit_input(R, PHI_MINUS)
    rng = stream(4)
    n = 20_000
    counts = {b: 0 for b in Branch}
    for _ in range(n):
        counts[sample_unit(pol("A"), Q, s, REF, rng).branch] += 1
    for b, p in ((Branch.PASS, 0.84215), (Branch.DETECTOR_CLICK, 0.009902), (Branch.LOSS, 0.14795)):
        assert abs(counts[b] / n - p) <= 3 * np.sqrt(p * (1 - p) / n) + 1e-4


def test_pass_post_state_is_renormalized():
    out = sample_unit(pol("A"), Q, unit_input(R, PHI_PLUS), ScatteringCoefficients.from_branches(1.0, 0.0), stream(1))
    assert out.post_state.norm_sq == pytest.approx(1)
    assert np.allclose(out.post_state.amplitudes, np.kron(L, PHI_MINUS))


def test_two_passes_restore_the_spin():
    c = ScatteringCoefficients.from_branches(0.9, 0.1)
    u = unit_map(c)
    spin_in = np.array([0.6, 0.8j])
    once = u.k_pass @ np.kron(R, spin_in)
    # rotate the photon back to |R> between the two passes
    twice = u.k_pass @ np.kron(np.array([[0, 1], [1, 0]]), np.eye(2)) @ once
    assert np.allclose(twice, 0.81 * np.kron(L, spin_in))


def test_raw_unit_rejects_an_l_photon():
    with pytest.raises(ValueError):
        sample_unit(pol("A"), Q, unit_input(L, PHI_PLUS), REF, stream(0))
    with pytest.raises(ValueError):
        sample_unit(spa("A"), Q, unit_input(R, PHI_PLUS), REF, stream(0))


def test_overcomplete_weights_are_rescaled():
    # the literal coefficients can make |T|^2 + |D|^2 exceed one at weak coupling
    c = branch_amplitudes(ScatteringParams.resonant(0.5, kappa_s=0.0))
    assert abs(c.T) ** 2 + abs(c.D) ** 2 > 1
    _, w_pass, w_click, w_loss = branch_probabilities(raw_traversal(pol("A"), Q, c), unit_input(R, PHI_PLUS))
    assert w_loss == 0 and w_pass + w_click == pytest.approx(1)
    assert w_pass / w_click == pytest.approx(abs(c.T) ** 2 / abs(c.D) ** 2)


# path-by-path interferometer check

_PATH_ORDER = [(p, d) for p in "RL" for d in "ud"]


def _scatter_table(r, t, r0, t0, literal):
    """Cavity scattering of (polarization, direction, spin) basis states."""
    flip = {"R": "L", "L": "R", "u": "d", "d": "u"}
    table = {}
    for p in "RL":
        for d in "ud":
            for s in "ud":
                coupled = (p == "R") == (d == s)
                refl, trans = (r, t) if coupled else (r0, t0)
                table[p, d, s] = [(refl, (flip[p], flip[d], s)), (trans, (p, d, s))]
    if literal:
        # the uncoupled transmission line for |L, up> with spin up, copied as printed
        table["L", "u", "u"] = [(t0, ("L", "u", "d")), (r0, ("R", "d", "u"))]
    return table


def _linear(state, rule):
    out = {}
    for key, amp in state.items():
        for coef, new in rule(key):
            out[new] = out.get(new, 0) + amp * coef
    return out


def interferometer(spin_in, r, t, r0, t0, literal=False):
    """Propagate |R, i1> through BS, H, the cavity, H and BS again."""
    table = _scatter_table(r, t, r0, t0, literal)
    splitter = lambda k: [(S, (k[0], "j1", k[2])), (S if k[1] == "i1" else -S, (k[0], "j2", k[2]))]
    merger = lambda k: [(S, (k[0], "i1", k[2])), (S if k[1] == "j1" else -S, (k[0], "i2", k[2]))]
    hadamard = lambda k: [(S, ("R", k[1], k[2])), (S if k[0] == "R" else -S, ("L", k[1], k[2]))]
    state = {("R", "i1", spin_in): 1.0}
    state = _linear(state, splitter)
    state = _linear(state, hadamard)
    state = _linear(state, lambda k: [(1, (k[0], {"j1": "u", "j2": "d"}[k[1]], k[2]))])
    state = _linear(state, lambda k: table[k])
    state = _linear(state, lambda k: [(1, (k[0], {"u": "j2", "d": "j1"}[k[1]], k[2]))])
    state = _linear(state, hadamard)
    return _linear(state, merger)


def _branch_matrices(r, t, r0, t0, literal=False):
    """Columns: input spin.  Rows: (pol, spin) of the i1 and i2 outputs."""
    idx = {("R", "u"): 0, ("R", "d"): 1, ("L", "u"): 2, ("L", "d"): 3}
    i1, i2 = np.zeros((4, 4), complex), np.zeros((4, 4), complex)
    for col, s in enumerate("ud"):
        for (p, port, s_out), amp in interferometer(s, r, t, r0, t0, literal).items():
            (i1 if port == "i1" else i2)[idx[p, s_out], col] = amp
    return i1, i2


complex_amp = st.builds(complex, st.floats(-1, 1), st.floats(-1, 1))


@settings(max_examples=100, deadline=None)
@given(complex_amp, complex_amp, complex_amp, complex_amp)
def test_interferometer_reproduces_the_branch_operators(r, t, r0, t0):
    c = ScatteringCoefficients(r=r, t=t, r0=r0, t0=t0, D=(t + r + t0 + r0) / 2, T=(t + r - t0 - r0) / 2)
    u = unit_map(c)
    i1, i2 = _branch_matrices(r, t, r0, t0)
    # keep only the |R> photon inputs of the unit operators
    assert np.allclose(i1, u.k_click[:, :2] @ np.eye(2, 4), atol=1e-12)
    assert np.allclose(i2, -u.k_pass[:, :2] @ np.eye(2, 4), atol=1e-12)  # equal up to a global sign


def test_literal_spin_flip_line_breaks_the_branch_structure():
    r, t, r0, t0 = 0.3 + 0.1j, 0.7 - 0.2j, 0.15 + 0.4j, -0.6 + 0.05j
    c = ScatteringCoefficients(r=r, t=t, r0=r0, t0=t0, D=(t + r + t0 + r0) / 2, T=(t + r - t0 - r0) / 2)
    i1, i2 = _branch_matrices(r, t, r0, t0, literal=True)
    assert not np.allclose(i1, unit_map(c).k_click[:, :2] @ np.eye(2, 4), atol=1e-6)
    # spin-up input then leaks into the wrong ports and flips the spin
    assert abs(i2[0, 0]) > 0.1 and abs(i1[1, 0]) > 0.1


# wired traversals


def test_polarization_traversal_is_diagonal():
    c = ScatteringCoefficients.from_branches(0.9, 0.2)
    tr = polarization_traversal("A", Q, c)
    expected = 0.9 * np.diag([1, 1, 1, -1])
    assert np.allclose(tr.k_pass, expected)
    assert len(tr.k_click) == 1


def test_spatial_traversal_is_diagonal_and_leaves_polarization():
    c = ScatteringCoefficients.from_branches(0.9, 0.2)
    tr = spatial_traversal("A", Q, c)
    # targets (pol, spa, spin): phase -1 exactly when spa = x2 and spin = down
    signs = [(-1 if (spa_bit and spin_bit) else 1) for _ in (0, 1) for spa_bit in (0, 1) for spin_bit in (0, 1)]
    assert np.allclose(tr.k_pass, 0.9 * np.diag(signs))
    assert len(tr.k_click) == 2


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 1.0), st.floats(0.0, 0.4))
def test_definite_polarization_passes_with_probability_T_squared(seed, T, D):
    # a photon in a definite state of the selected DOF sees P(pass) = |T|^2
    if T**2 + D**2 > 1:
        T = np.sqrt(1 - D**2)
    c = ScatteringCoefficients.from_branches(T, D)
    rng = stream(seed)
    spin_vec = rng.normal(size=2) + 1j * rng.normal(size=2)
    s = tensor(basis_state(pol("A"), int(rng.integers(2))), basis_state(Q, spin_vec / np.linalg.norm(spin_vec)))
    _, w_pass, w_click, w_loss = branch_probabilities(polarization_traversal("A", Q, c), s)
    assert w_pass == pytest.approx(T**2, abs=1e-12)
    assert w_pass + w_click + w_loss == pytest.approx(1, abs=1e-12)
    assert 0 <= w_loss <= 1


def test_sample_traversal_failure_keeps_no_state():
    c = ScatteringCoefficients.from_branches(0.0, 1.0)
    s = tensor(basis_state(pol("A"), 1), basis_state(Q, PHI_PLUS))
    out = sample_traversal(polarization_traversal("A", Q, c), s, stream(2))
    assert out.branch is Branch.DETECTOR_CLICK and out.post_state is None
