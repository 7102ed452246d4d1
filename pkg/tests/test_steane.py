import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qzk import qsim, steane

K1 = steane.CodeParams(1)


def pauli_string(pauli, support, n):
    op = {"X": qsim.X, "Z": qsim.Z}[pauli]
    mats = [op if q in support else np.eye(2) for q in range(n)]
    return qsim.kron_all(mats)


def test_sequence_lengths():
    assert len(steane.encoding_sequence(K1)) == 14
    assert len(steane.syndrome_sequence(K1)) == 30
    assert len(steane.transversal_sequence("CNOT", K1)) == 7
    assert len(steane.stabilizers(1)) == 6
    assert steane.encoding_sequence(steane.CodeParams(0)).gates == []


def test_encoded_states_are_stabilized(rng):
    psi = steane.encode_vector(qsim.random_pure(1, rng).amplitudes, 1, K1)
    for pauli, supp in steane.stabilizers(1):
        assert np.allclose(pauli_string(pauli, supp, 7) @ psi, psi, atol=1e-12)


def test_stabilizers_commute():
    gens = [pauli_string(p, s, 7) for p, s in steane.stabilizers(1)]
    for a, b in itertools.combinations(gens, 2):
        assert np.allclose(a @ b, b @ a)


def test_logical_operators_act_on_codewords():
    zero = steane.encode_vector(np.array([1, 0]), 1, K1)
    one = steane.encode_vector(np.array([0, 1]), 1, K1)
    xl = pauli_string("X", steane.LOGICAL_SUPPORT, 7)
    zl = pauli_string("Z", steane.LOGICAL_SUPPORT, 7)
    assert np.allclose(xl @ zero, one)
    assert np.allclose(zl @ one, -one)


@pytest.mark.parametrize("gate,logical", [("H", qsim.H), ("P", qsim.P), ("X", qsim.X)])
def test_single_qubit_transversal_gates(gate, logical, rng):
    v = qsim.random_pure(1, rng).amplitudes
    seq = steane.transversal_sequence(gate, K1)
    out = seq.apply(steane.encode_vector(v, 1, K1))
    assert abs(np.vdot(steane.encode_vector(logical @ v, 1, K1), out)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("gate,logical", [("CNOT", qsim.CNOT), ("CZ", qsim.CZ)])
def test_two_qubit_transversal_gates(gate, logical, rng):
    v = qsim.random_pure(2, rng).amplitudes
    out = steane.transversal_sequence(gate, K1).apply(steane.encode_vector(v, 2, K1))
    assert abs(np.vdot(steane.encode_vector(logical @ v, 2, K1), out)) == pytest.approx(1.0, abs=1e-10)


def test_t_gadget_both_branches_give_t(rng):
    v = qsim.random_pure(1, rng).amplitudes
    seq = steane.transversal_sequence("T", K1)
    psi = seq.apply(steane.encode_vector(np.kron(v, steane.magic_state()), 2, K1))
    target = steane.encode_vector(qsim.T @ v, 1, K1)
    branches = steane.t_correction_branches(psi, K1)
    assert sum(p for p, _ in branches) == pytest.approx(1.0)
    for p, rho in branches:
        assert np.vdot(target, rho @ target).real == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("pauli", ["X", "Z"])
def test_syndrome_fires_on_single_errors(pauli, rng):
    seq = steane.syndrome_sequence(K1)
    n = seq.num_qubits
    base = steane.encode_vector(qsim.random_pure(1, rng).amplitudes, 1, K1)
    for q in range(7):
        err = qsim.apply_matrix(base, {"X": qsim.X, "Z": qsim.Z}[pauli], (q,), 7)
        psi = seq.apply(np.kron(err, np.eye(64)[0]))
        anc = np.real(np.diag(qsim.reduced_from_vector(psi, list(range(7, 13)), n)))
        assert anc[0] < 1e-12  # some ancilla flipped


def test_syndrome_is_silent_on_codewords(rng):
    seq = steane.syndrome_sequence(K1)
    base = steane.encode_vector(qsim.random_pure(1, rng).amplitudes, 1, K1)
    psi = seq.apply(np.kron(base, np.eye(64)[0]))
    anc = np.real(np.diag(qsim.reduced_from_vector(psi, list(range(7, 13)), 13)))
    assert anc[0] == pytest.approx(1.0)


@given(st.sampled_from(["H", "P", "CNOT", "T"]), st.data())
def test_sim_marginal_matches_random_logical_states(gate, data):
    seq = steane.transversal_sequence(gate, K1)
    t = data.draw(st.integers(0, len(seq)))
    blocks = seq.logical_wires + seq.magic_blocks
    picks = [data.draw(st.lists(st.integers(0, 6), max_size=K1.block_bound(t), unique=True)) for _ in range(blocks)]
    S = sorted(b * 7 + q for b, qs in enumerate(picks) for q in qs)
    ref = steane.sim_marginal(gate, t, S, K1)
    rng = np.random.default_rng(data.draw(st.integers(0, 10**6)))
    v = qsim.random_pure(seq.logical_wires, rng).amplitudes
    if seq.magic_blocks:
        v = np.kron(v, steane.magic_state())
    psi = seq.apply(steane.encode_vector(v, blocks, K1), t)
    assert np.abs(qsim.reduced_from_vector(psi, S, seq.num_qubits) - ref).max() <= 1e-9


def test_subset_bound_enforced():
    with pytest.raises(ValueError):
        steane.sim_marginal("H", 1, [0, 1, 2], K1)


def test_logical_support_is_not_simulable():
    with pytest.raises(steane.NonSimulable):
        steane.sim_marginal("H", 0, [0, 3, 4], steane.CodeParams(1, s_max=3))


def test_kappa_zero_hides_nothing():
    with pytest.raises(steane.NonSimulable):
        steane.sim_marginal("H", 0, [0], steane.CodeParams(0, s_max=1))


def test_block_marginals_compose(rng):
    sigma = qsim.random_pure(2, rng).amplitudes
    S = [1, 5, 9, 12]
    psi = steane.encode_vector(sigma, 2, K1)
    ref = steane.sim_marginal_blocks(2, S, K1)
    assert np.abs(qsim.reduced_from_vector(psi, S, 14) - ref).max() <= 1e-9


def test_cross_terms_vanish_on_one_qubit_per_block():
    assert steane.cross_term_norm("01", "10", [2, 9], K1) <= 1e-12
    # the full logical support of one block sees the difference
    assert steane.cross_term_norm("0", "1", [0, 3, 4], K1) > 0.1


def test_concatenated_sequences_are_symbolic():
    p2 = steane.CodeParams(2)
    assert p2.N == 49 and p2.D == 9
    assert len(steane.stabilizers(2)) == 48
    with pytest.raises(qsim.CapacityError):
        steane.encode_vector(np.array([1, 0]), 1, p2)
