import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qzk import clockham, haar, qsim


def random_sequence(rng, T, n1, n2):
    ns = n1 + n2
    steps = []
    for _ in range(T):
        width = int(rng.integers(1, min(2, ns) + 1))
        targets = tuple(int(q) for q in rng.choice(ns, size=width, replace=False))
        steps.append(qsim.GateOp(haar.haar_matrix(2**width, rng), targets))
    return clockham.UnitarySequence(steps, n1, n2, [list(range(n2))] if n2 else [])


def dense(H):
    d = 2**H.num_qubits
    return np.stack([H.apply_full(e) for e in np.eye(d, dtype=complex)], axis=1)


def literal_legal_block(seq):
    """Textbook propagation terms restricted to unary clocks: a (T+1) x (T+1) block matrix."""
    T, d = seq.T, 2**seq.n_state
    out = np.zeros(((T + 1) * d,) * 2, dtype=complex)
    eye = np.eye(d)
    for t, g in enumerate(seq.steps, start=1):
        u = qsim.apply_matrix(eye, g.matrix, g.targets, seq.n_state).T
        a, b = slice((t - 1) * d, t * d), slice(t * d, (t + 1) * d)
        out[a, a] += 0.5 * eye
        out[b, b] += 0.5 * eye
        out[b, a] -= 0.5 * u
        out[a, b] -= 0.5 * u.conj().T
    return out


@given(st.integers(0, 10**6))
def test_history_states_have_zero_energy(seed):
    rng = np.random.default_rng(seed)
    seq = random_sequence(rng, int(rng.integers(2, 6)), int(rng.integers(1, 3)), int(rng.integers(0, 3)))
    H = clockham.build_history_hamiltonian(seq)
    hs = clockham.history_state(seq, qsim.random_pure(seq.n1, rng))
    assert clockham.energy(H, hs) <= 1e-12
    assert clockham.history_subspace_distance(seq, hs) <= 1e-9


def test_terms_are_projectors(rng):
    seq = random_sequence(rng, 4, 1, 2)
    H = clockham.build_history_hamiltonian(seq)
    for term in H.terms:
        m = term.local_matrix()
        assert np.allclose(m @ m, m, atol=1e-12)
        assert np.allclose(m, m.conj().T, atol=1e-12)


def test_boundary_terms_agree_with_literal_form_on_legal_clocks(rng):
    seq = random_sequence(rng, 4, 1, 1)
    H = clockham.build_history_hamiltonian(seq)
    prop = clockham.HistoryHamiltonian(H.T, H.n1, H.n2, [t for t in H.terms if t.kind == "prop"])
    d = (H.T + 1) * 2**H.n_state
    legal = np.stack([prop.apply_legal(e.reshape(H.T + 1, -1)).reshape(-1) for e in np.eye(d, dtype=complex)], axis=1)
    assert np.allclose(legal, literal_legal_block(seq), atol=1e-12)


def test_legal_sector_holds_the_ground_energy(rng):
    seq = random_sequence(rng, 3, 1, 1)
    H = clockham.with_out_term(clockham.build_history_hamiltonian(seq), np.diag([1.0, 0.0]), [1])
    exact = np.linalg.eigvalsh(dense(H)).min()
    lam, _ = clockham.min_eigenvalue(H, sector="legal")
    lam_full, _ = clockham.min_eigenvalue(H, sector="full")
    assert lam == pytest.approx(exact, abs=1e-8)
    assert lam_full == pytest.approx(exact, abs=1e-8)


def test_lanczos_matches_eigh_on_random_hermitian(rng):
    a = rng.normal(size=(60, 60)) + 1j * rng.normal(size=(60, 60))
    a = a + a.conj().T
    lam, v = clockham.lanczos_min(lambda x: a @ x, 60, tol=1e-10)
    assert lam == pytest.approx(np.linalg.eigvalsh(a)[0], abs=1e-8)
    assert np.linalg.norm(a @ v - lam * v) <= 1e-7


def test_lanczos_survives_degenerate_spectrum():
    a = np.diag([0.0] * 5 + [1.0] * 5).astype(complex)
    lam, _ = clockham.lanczos_min(lambda x: a @ x, 10)
    assert lam == pytest.approx(0.0, abs=1e-10)


def test_stabilizer_term_penalises_illegal_clock():
    seq = clockham.UnitarySequence([clockham.identity_step(), clockham.identity_step()], 1, 0)
    H = clockham.build_history_hamiltonian(seq)
    psi = np.kron(qsim.PureState.basis("01").amplitudes, [1, 0])
    energies = clockham.term_energies(H, psi)
    stab = [e for e, t in zip(energies, H.terms) if t.kind == "stab"]
    assert stab == [pytest.approx(1.0)]


def test_unary_index():
    assert clockham.unary_index(0, 3) == 0b000
    assert clockham.unary_index(2, 3) == 0b110
    assert clockham.unary_index(3, 3) == 0b111


def test_short_sequences_rejected():
    with pytest.raises(ValueError):
        clockham.UnitarySequence([clockham.identity_step()], 1, 0)


def test_history_subspace_distance_detects_off_history_states(rng):
    seq = random_sequence(rng, 3, 1, 1)
    hs = clockham.history_state(seq, qsim.random_pure(1, rng)).amplitudes
    bad = hs.copy()
    bad[clockham.unary_index(1, 3) * 4] += 0.3
    bad /= np.linalg.norm(bad)
    assert clockham.history_subspace_distance(seq, bad) > 1e-3
