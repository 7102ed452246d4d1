import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qzk import haar, merkle, qsim


def test_path_sets():
    assert merkle.path_set(1, 4) == {1}
    assert merkle.path_set(5, 4) == {5, 2, 1}
    assert merkle.path_set(7, 4) == {7, 3, 1}
    with pytest.raises(ValueError):
        merkle.path_set(8, 4)


def test_r_sets():
    assert merkle.r_set_of({4}, 4) == {1, 2, 3, 4, 5}
    assert merkle.r_set_of(set(), 4) == set()
    assert merkle.r_set_of({2}, 2) == {1, 2, 3}


@given(st.sampled_from([2, 4, 8]), st.data())
def test_r_set_contains_and_is_monotone(ell, data):
    nodes = st.sets(st.integers(1, 2 * ell - 1), max_size=4)
    a = data.draw(nodes)
    b = a | data.draw(nodes)
    ra, rb = merkle.r_set_of(a, ell), merkle.r_set_of(b, ell)
    assert a <= ra <= rb


def test_layout():
    lay = merkle.TreeLayout(4, 2)
    assert lay.num_qubits == 14
    assert lay.regs(3) == (4, 5)
    assert lay.leaf(0) == 4 and lay.is_leaf(7) and not lay.is_leaf(3)
    with pytest.raises(ValueError):
        merkle.TreeLayout(3, 1)


def test_single_leaf_commit_is_trivial(rng):
    sigma = qsim.random_pure(1, rng)
    oracle = haar.sample_haar(6, seed=0)
    regs = merkle.commit(sigma, 1, 6, oracle)
    assert oracle.queries == 0
    assert np.allclose(regs.state.amplitudes, np.kron(sigma.amplitudes, [1, 0]))


def test_identity_oracle_leaves_root_empty(rng):
    sigma = qsim.random_pure(2, rng)
    ident = haar.OracleHandle(3, np.eye(8, dtype=complex))
    regs = merkle.commit(sigma, 2, 3, ident)
    root = qsim.partial_trace(regs.state, [0]).matrix
    assert root[0, 0].real == pytest.approx(1.0)
    assert qsim.trace_distance_matrices(regs.leaf_state([2, 3]).matrix, sigma.density()) <= 1e-12


def test_two_leaf_round_trip_by_hand(rng):
    sigma = qsim.random_pure(2, rng)
    oracle = haar.sample_haar(3, seed=11)
    regs = merkle.commit(sigma, 2, 3, oracle)
    # node order is (root, leaf2, leaf3); G acts on (leaf2, leaf3, root)
    back = qsim.apply_matrix(regs.state.amplitudes, oracle.dagger, (1, 2, 0), 3)
    assert np.abs(back[0b100:]).sum() <= 1e-12  # root qubit reads 0
    rho = qsim.reduced_from_vector(back, [1, 2], 3)
    assert qsim.trace_distance_matrices(rho, sigma.density()) <= 1e-12


def test_commit_rejects_bad_lambda(rng):
    with pytest.raises(ValueError):
        merkle.commit(qsim.random_pure(2, rng), 2, 4, haar.sample_haar(4, seed=0))


def test_commit_query_count(rng):
    oracle = haar.sample_haar(3, seed=2)
    merkle.commit(qsim.random_pure(4, rng), 4, 3, oracle)
    assert oracle.queries == 3


@given(st.sampled_from([(2, 1), (4, 1), (2, 2)]), st.integers(0, 10**6))
def test_full_decommit_round_trip(shape, seed):
    ell, b = shape
    rng = np.random.default_rng(seed)
    sigma = qsim.random_mixed(ell, rng) if seed % 2 else qsim.random_pure(ell, rng)
    oracle = haar.sample_haar(3 * b, seed=seed)
    regs = merkle.commit(sigma, ell, 3 * b, oracle)
    leaves = set(range(ell, 2 * ell))
    regs.transfer(merkle.r_set_of(leaves, ell))
    dec = merkle.decommit(regs, set(), leaves, oracle)
    assert dec.ok and dec.p_bot <= 1e-9
    assert all(abs(p - 1) <= 1e-9 for p in dec.zero_probs)
    sig = sigma.density() if isinstance(sigma, qsim.PureState) else sigma.matrix
    assert qsim.trace_distance_matrices(regs.leaf_state(leaves).matrix, sig) <= 1e-9


def test_two_round_opening_matches_single_shot(rng):
    sigma = qsim.random_pure(4, rng)
    oracle = haar.sample_haar(3, seed=5)
    one = merkle.commit(sigma, 4, 3, oracle)
    two = merkle.commit(sigma, 4, 3, oracle)
    one.transfer(merkle.r_set_of({4, 7}, 4))
    merkle.decommit(one, set(), {4, 7}, oracle)

    two.transfer(merkle.r_set_of({4}, 4))
    q0 = oracle.queries
    first = merkle.decommit(two, set(), {4}, oracle)
    assert first.queries == oracle.queries - q0 == 2  # nodes 1 and 2
    two.transfer(merkle.r_set_of({7}, 4))
    second = merkle.decommit(two, {4}, {7}, oracle)
    assert second.queries == 1  # only node 3 is new
    assert np.abs(one.leaf_state([4, 7]).matrix - two.leaf_state([4, 7]).matrix).max() <= 1e-9


def test_missing_registers_are_refused(rng):
    oracle = haar.sample_haar(3, seed=1)
    regs = merkle.commit(qsim.random_pure(4, rng), 4, 3, oracle)
    regs.transfer({1, 2, 3})
    with pytest.raises(KeyError):
        merkle.decommit(regs, set(), {4}, oracle)
    with pytest.raises(ValueError):
        merkle.decommit(regs, set(), {2}, oracle)


def test_tampering_is_caught():
    rng = np.random.default_rng(3)
    caught = 0
    trials = 200
    b = 2
    for _ in range(trials):
        oracle = haar.sample_haar(3 * b, seed=int(rng.integers(2**31)))
        regs = merkle.commit(qsim.random_pure(4, rng), 4, 3 * b, oracle)
        q = regs.layout.regs(2)[0]
        regs.state = qsim.apply_gate(regs.state, qsim.GateOp(qsim.X, (q,)))
        regs.transfer(merkle.r_set_of({4, 5, 6, 7}, 4))
        caught += not merkle.decommit(regs, set(), {4, 5, 6, 7}, oracle, rng).ok
    assert caught / trials >= 1 - 2**-b - 3 * np.sqrt(0.25 / trials)
