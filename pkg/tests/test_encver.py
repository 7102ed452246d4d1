import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ONE, ZERO, instance
from qzk import clockham, encver, qsat, qsim, steane

I2 = np.eye(2)
P0 = np.diag([1.0, 0.0])
P1 = np.diag([0.0, 1.0])


def kron_on(ops: dict, n: int) -> np.ndarray:
    return qsim.kron_all([ops.get(q, I2) for q in range(n)])


def cnot(c, t, n):
    return kron_on({c: P0}, n) + kron_on({c: P1, t: qsim.X}, n)


def cz(c, t, n):
    return kron_on({c: P0}, n) + kron_on({c: P1, t: qsim.Z}, n)


def program_matrix(prog):
    seq = encver.unitary_sequence(prog)
    n = seq.n_state
    u = np.eye(2**n, dtype=complex)
    for g in seq.steps:
        u = qsim.apply_matrix(u.T, g.matrix, g.targets, n).T
    return u


@pytest.fixture(scope="module")
def prog_one(one_check):
    return encver.build_program(one_check)


@pytest.fixture(scope="module")
def H_one(prog_one):
    return encver.build_encoded_hamiltonian(prog_one)


@pytest.fixture(scope="module")
def H_contra(contradiction):
    return encver.build_encoded_hamiltonian(encver.build_program(contradiction))


def test_phase_lengths_two_by_two():
    inst = instance(2, [(0,), (1,)], [ONE, ZERO])
    prog = encver.build_program(inst)
    assert prog.phase_lengths == (2, 1, 1, 1, 3, 4, 1)
    assert prog.T == 13
    assert [s.indexed for s in prog.steps] == [False] * 5 + [True] * 7 + [False]


def test_layout_widths():
    lay = encver.Layout(n=2, m=4, k=2, gamma=1, N=7)
    assert lay.sizes == {"Eotp": 28, "Edata": 14, "Echk": 36, "Eidx": 14, "Emidx": 14, "Emagic": 7, "Eanc": 7}
    assert lay.n_witness == 42
    assert lay.block("Echk", 5) == tuple(range(42 + 30, 42 + 36))
    assert lay.index_bits(2) == (1, 0)


def test_emitted_gates_match_monolithic_unitary(prog_one):
    # qubits: Eotp 0,1 | Edata 2 | Eidx 3 | Emidx 4 | Emagic 5 | Eanc 6
    n = 7
    setup = cnot(3, 4, n) @ kron_on({3: qsim.H}, n) @ kron_on({5: qsim.T}, n) @ kron_on({5: qsim.H}, n)
    undo = cz(1, 2, n) @ cnot(0, 2, n)
    check0 = cnot(2, 6, n)  # accepts iff data is 1
    check1 = kron_on({6: qsim.X}, n)  # always accepts
    body = kron_on({3: P0}, n) @ check0 @ undo + kron_on({3: P1}, n) @ check1 @ undo
    want = body @ setup
    assert np.abs(program_matrix(prog_one) - want).max() <= 1e-9


def test_phase_three_makes_index_uniform():
    inst = qsat.pad_to_power_of_two(instance(1, [(0,)] * 3, [ONE] * 3))
    prog = encver.build_program(inst)
    seq = encver.unitary_sequence(prog)
    psi = np.zeros(2**seq.n_state, dtype=complex)
    psi[0] = 1
    for g in seq.steps[: prog.phase_end(3)]:
        psi = qsim.apply_matrix(psi, g.matrix, g.targets, seq.n_state)
    marg = qsim.reduced_from_vector(psi, prog.layout.register("Eidx"), seq.n_state)
    assert np.allclose(np.diag(marg).real, 0.25)


def test_rejects_bad_inputs(contradiction):
    with pytest.raises(ValueError):
        encver.build_program(instance(1, [(0,)] * 3, [ONE] * 3))
    with pytest.raises(ValueError):
        encver.build_program(contradiction, c_test=1)
    with pytest.raises(qsim.CapacityError):
        encver.unitary_sequence(encver.build_program(contradiction, steane.CodeParams(1)))


def test_trivial_pad_is_unencoded(rng):
    phi = qsim.random_pure(1, rng)
    w = encver.otp_witness(phi, ("0", "0"))
    assert np.allclose(w.amplitudes, np.kron([1, 0, 0, 0], phi.amplitudes))


def test_uniform_pad_hides_data(rng):
    ens = encver.otp_witness(qsim.random_pure(1, rng), "uniform")
    assert len(ens.members) == 4
    assert np.allclose(qsim.reduced_from_rho(ens.density(), [2], 3), np.eye(2) / 2)


@given(st.integers(0, 1), st.integers(0, 1), st.integers(0, 10**6))
def test_undoing_the_pad_recovers_phi(a, b, seed):
    phi = qsim.random_pure(1, np.random.default_rng(seed))
    w = encver.otp_witness(phi, ((a,), (b,))).amplitudes
    w = cz(1, 2, 3) @ cnot(0, 2, 3) @ w
    rho = qsim.reduced_from_vector(w, [2], 3)
    assert np.abs(rho - phi.density()).max() <= 1e-12


def test_encoded_pad_at_kappa_one(rng):
    w = encver.otp_witness(qsim.PureState.basis("1"), ("1", "0"), steane.CodeParams(1))
    assert w.num_qubits == 21
    # keys |1,0>, then X|1> = |0> on the data
    ref = steane.encode_vector(np.eye(8)[0b100], 3, steane.CodeParams(1))
    assert abs(np.vdot(ref, w.amplitudes)) == pytest.approx(1.0)


def test_run_venc_boundaries(all_accept, prog_one, rng):
    prog = encver.build_program(all_accept)
    assert encver.run_venc(prog, encver.otp_witness(qsim.random_pure(1, rng), "uniform")) == pytest.approx(1.0, abs=1e-12)
    assert encver.run_venc(prog_one, encver.otp_witness(qsim.PureState.basis("1"), ("0", "0"))) == pytest.approx(1.0, abs=1e-12)
    assert encver.run_venc(prog_one, encver.otp_witness(qsim.PureState.basis("0"), ("1", "1"))) == pytest.approx(0.5, abs=1e-12)


@given(st.integers(0, 10**6))
def test_acceptance_never_beats_val(contradiction, seed):
    rng = np.random.default_rng(seed)
    prog = encver.build_program(contradiction)
    val = qsat.val_max(contradiction)[0]
    w = qsim.random_mixed(3, rng)
    assert encver.run_venc(prog, w) <= val + 1e-9


@pytest.mark.parametrize("k,gamma", [(1, 1), (2, 1), (1, 2), (3, 2)])
def test_term_count(k, gamma):
    inst = qsat.QsatInstance(3, k, gamma, [tuple(range(k))] * 2, [qsat.always_accept_circuit(k)] * 2)
    for kappa in (0, 1):
        H = encver.build_encoded_hamiltonian(encver.build_program(inst, steane.CodeParams(kappa)))
        assert H.M == 2 * H.program.T + 5 + 1
        assert H.B == 5


def test_fit_recovers_exact_law():
    rows = [(k, g, 6 * k + 8 * g + 18) for k in (1, 2, 3) for g in (1, 2)]
    assert encver.fit_term_count(rows) == ((6, 8, 18), 0)
    assert encver.fit_term_count(rows[:-1] + [(3, 2, 53)])[1] > 0


def test_locality_of_unindexed_terms():
    inst = qsat.pad_to_power_of_two(instance(2, [(0,), (1,), (0,)], [ONE, ZERO, ONE]))
    prog = encver.build_program(inst, steane.CodeParams(1))
    H = encver.build_encoded_hamiltonian(prog)
    lay = prog.layout
    for row in H.table:
        if not row["indexed"] and row["kind"] != "out" and not (row["kind"] == "in" and row["index"] == 5):
            assert row["support_size"] <= 3 + 2 * lay.logm * lay.N
    assert sum(r["indexed"] for r in H.table) == prog.phase_lengths[4] + prog.phase_lengths[5]
    json.dumps(H.summary())
    json.dumps(prog.summary())


def test_hamiltonian_terms_are_projectors(H_one):
    for term in H_one.terms:
        if term.pieces:
            m = term.local_matrix()
            assert np.allclose(m @ m, m, atol=1e-10)


def test_honest_history_state_energy(H_one, one_check):
    prog = H_one.program
    phi = qsim.PureState(1, qsat.canonical_maximizer(one_check))
    w = encver.otp_witness(phi, ("1", "0"))
    hs = clockham.history_state(encver.unitary_sequence(prog), w)
    e = clockham.energy(H_one.history, hs)
    # history part vanishes; only the output term sees the rejection, weighted 1/(T+1)
    assert e == pytest.approx((1 - encver.run_venc(prog, w)) / (prog.T + 1), abs=1e-10)


def test_branch_calculus_equals_energy(H_contra, rng):
    psi = qsim.random_pure(H_contra.history.num_qubits, rng)
    p, per_term = encver.rejection_probability(H_contra, psi, per_term=True)
    assert p == pytest.approx(clockham.energy(H_contra.history, psi) / H_contra.M, abs=1e-9)
    energies = clockham.term_energies(H_contra.history, psi)
    assert np.allclose(np.array(per_term) * H_contra.M, energies, atol=1e-9)


def test_stabilizer_term_on_illegal_clock(H_contra, rng):
    hist = H_contra.history
    T = hist.T
    clock = np.zeros(2**T)
    clock[int("01" + "0" * (T - 2), 2)] = 1.0
    psi = qsim.PureState(hist.num_qubits, np.kron(clock, qsim.random_pure(hist.n_state, rng).amplitudes))
    _, per_term = encver.rejection_probability(H_contra, psi, per_term=True)
    stab = [pos for pos, t in enumerate(hist.terms) if t.kind == "stab" and t.index == 1][0]
    assert per_term[stab] == pytest.approx(1.0 / H_contra.M, abs=1e-12)


def test_sampled_verifier_matches_exact(H_contra):
    rng = np.random.default_rng(7)
    psi = qsim.random_pure(H_contra.history.num_qubits, rng)
    exact = encver.rejection_probability(H_contra, psi)
    runs = 300
    rejects = 0
    for _ in range(runs):
        ok, tr = encver.venc_h_verify(H_contra, psi, rng)
        rejects += not ok
        assert not set(tr["round1"]) & set(tr["round2"])
        assert tr["outcome"] == ("accept" if ok else "reject")
    se = np.sqrt(exact * (1 - exact) / runs)
    assert abs(rejects / runs - exact) <= 4 * se


def test_history_state_of_all_accept_never_rejected(all_accept, rng):
    H = encver.build_encoded_hamiltonian(encver.build_program(all_accept))
    w = encver.otp_witness(qsim.random_pure(1, rng), ("0", "1"))
    hs = clockham.history_state(encver.unitary_sequence(H.program), w)
    assert encver.rejection_probability(H, hs) <= 1e-9


def test_completeness_bound_and_measured_constant(contradiction, all_accept):
    H, ver = encver.reduce_localqma(contradiction)
    assert ver.val == pytest.approx(0.5, abs=1e-9)
    assert ver.lambda_min <= 1 - ver.val + 1e-8
    assert ver.lambda_min > 0
    assert ver.soundness == pytest.approx(1 - ver.lambda_min / H.M)
    assert ver.measured_c == pytest.approx((1 - ver.val) / np.sqrt(ver.lambda_min))
    _, ver1 = encver.reduce_localqma(all_accept)
    assert ver1.completeness == pytest.approx(1.0)
    assert ver1.lambda_min <= 1e-8
    assert ver1.measured_c is None


def test_reduction_pads_the_instance():
    inst = instance(1, [(0,)] * 3, [ONE, ZERO, ONE])
    H, ver = encver.reduce_localqma(inst, solve=False)
    assert H.program.layout.m == 4
    assert ver.val == pytest.approx(qsat.padded_value(3, qsat.val_max(inst)[0]), abs=1e-9)
    assert ver.lambda_min is None and ver.soundness is None


def _views(H, positions):
    sim = encver._ViewSimulator(H.program)
    for pos in positions:
        view = encver.simulate_term_view(H, pos, sim)
        ref = encver.honest_view_oracle(H, view.support)
        yield pos, view, qsim.trace_distance_matrices(view.matrix.matrix, ref)


def test_view_of_clock_only_terms_is_exact(H_contra):
    stabs = [p for p, t in enumerate(H_contra.terms) if t.kind == "stab"]
    for _, view, dist in _views(H_contra, stabs[:3]):
        assert view.case == 1 and view.alpha == 0
        assert dist <= 1e-9


def test_view_exact_when_val_is_one(H_one):
    out = [p for p, t in enumerate(H_one.terms) if t.kind == "out"]
    indexed = [(p, i) for p in list(H_one.members)[:2] for i in range(2)]
    for _, view, dist in _views(H_one, out + indexed):
        assert dist <= 1e-9


def test_view_error_within_one_minus_val(H_contra):
    out = [p for p, t in enumerate(H_contra.terms) if t.kind in ("out", "prop")][-3:]
    for _, view, dist in _views(H_contra, out):
        assert dist <= 1 - 0.5 + 1e-9
        if view.case != 4:
            assert dist <= 1e-9


def test_view_rejects_plain_position_for_members(H_contra):
    with pytest.raises(ValueError):
        encver.simulate_term_view(H_contra, (0, 0))
