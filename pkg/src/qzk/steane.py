"""Concatenated Steane code: gate sequences and local-simulation oracles.

Level-1 code, 7 physical qubits indexed 0..6::

    stabilizer generators (each used once with X and once with Z)
        g1 = {0, 1, 2, 4}     pivot 1
        g2 = {2, 3, 4, 5}     pivot 5
        g3 = {0, 2, 3, 6}     pivot 6
    logical X = X on {0, 3, 4},  logical Z = Z on {0, 3, 4}

These are the rows of a Hamming [7,4] parity-check matrix, row-reduced so that
each generator owns one pivot qubit outside the logical support.  The
encoder fans qubit 0 out to {3, 4}, puts each pivot in |+> and fans the pivot
out to the rest of its generator.  Transversal H, CNOT and S^dagger implement
logical H, CNOT and P.  Logical T consumes an encoded |T> = T|+> block: a
transversal CNOT (data -> magic) followed by a measurement-controlled logical
P on the data block.  The controlled fix-up is not a unitary step of the
sequence; it is exposed separately as ``GateSequence.correction``.

Level kappa encodes the 7 leader qubits (0, 7^(k-1), ...) at level 1 and
then each sub-block at level kappa-1.  Dense checks run only at kappa <= 1.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qsim

GENERATORS = ((0, 1, 2, 4), (2, 3, 4, 5), (0, 2, 3, 6))
PIVOTS = (1, 5, 6)
LOGICAL_SUPPORT = (0, 3, 4)
SDG = qsim.P.conj().T
MAX_NUMERIC_KAPPA = 1


class NonSimulable(ValueError):
    """The marginal depends on the logical input."""


@dataclass(frozen=True)
class CodeParams:
    kappa: int = 1
    s_max: int | None = None  # override for the per-block subset bound

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")

    @property
    def N(self) -> int:
        return 7**self.kappa

    @property
    def D(self) -> int:
        return 3**self.kappa

    def block_bound(self, t: int) -> int:
        if self.s_max is not None:
            return self.s_max
        if t == 0:
            return self.D - 1
        return 2 if self.kappa >= 1 else 0


@dataclass
class GateSequence:
    name: str
    num_qubits: int
    gates: list
    magic_blocks: int = 0
    logical_wires: int = 1
    correction: dict | None = None

    def __len__(self) -> int:
        return len(self.gates)

    def unitary(self) -> np.ndarray:
        if self.num_qubits > 14:
            raise qsim.CapacityError("dense product limited to 14 qubits")
        n = self.num_qubits
        u = np.eye(2**n, dtype=complex)
        for g in self.gates:
            u = qsim.apply_matrix(u.T, g.matrix, g.targets, n).T
        return u

    def apply(self, psi: np.ndarray, upto: int | None = None) -> np.ndarray:
        for g in self.gates[: len(self.gates) if upto is None else upto]:
            psi = qsim.apply_matrix(psi, g.matrix, g.targets, self.num_qubits)
        return psi


def _cnot(c: int, t: int) -> qsim.GateOp:
    return qsim.GateOp(qsim.CNOT, (c, t))


def _level1_encoder(qubits: Sequence[int]) -> list:
    q = list(qubits)
    gates = [_cnot(q[0], q[j]) for j in LOGICAL_SUPPORT if j != 0]
    gates += [qsim.GateOp(qsim.H, (q[p],)) for p in PIVOTS]
    for g, p in zip(GENERATORS, PIVOTS):
        gates += [_cnot(q[p], q[j]) for j in g if j != p]
    return gates


def _encoder_gates(kappa: int, offset: int = 0) -> list:
    if kappa == 0:
        return []
    sub = 7 ** (kappa - 1)
    gates = _level1_encoder([offset + j * sub for j in range(7)])
    for j in range(7):
        gates += _encoder_gates(kappa - 1, offset + j * sub)
    return gates


def encoding_sequence(params: CodeParams) -> GateSequence:
    return GateSequence("Enc", params.N, _encoder_gates(params.kappa))


def decoding_sequence(params: CodeParams) -> GateSequence:
    enc = encoding_sequence(params)
    return GateSequence("Dec", params.N, [g.dagger() for g in reversed(enc.gates)])


def stabilizers(kappa: int) -> list[tuple[str, tuple]]:
    """Generators as (pauli, support); N - 1 of them at every level."""
    if kappa == 0:
        return []
    sub = 7 ** (kappa - 1)
    out = []
    for j in range(7):
        out += [(p, tuple(j * sub + q for q in s)) for p, s in stabilizers(kappa - 1)]
    inner_logical = logical_support(kappa - 1)
    for pauli in ("Z", "X"):
        for g in GENERATORS:
            out.append((pauli, tuple(j * sub + q for j in g for q in inner_logical)))
    return out


def logical_support(kappa: int) -> tuple:
    if kappa == 0:
        return (0,)
    sub = 7 ** (kappa - 1)
    inner = logical_support(kappa - 1)
    return tuple(j * sub + q for j in LOGICAL_SUPPORT for q in inner)


def syndrome_sequence(params: CodeParams) -> GateSequence:
    """Syndrome extraction onto N-1 ancillas placed after the block.

    Z-type generators: parity copied by CNOTs into the ancilla.  X-type:
    ancilla in |+>, CNOTs from the ancilla, then H back.
    """
    N = params.N
    gates = []
    for a, (pauli, supp) in enumerate(stabilizers(params.kappa)):
        anc = N + a
        if pauli == "Z":
            gates += [_cnot(q, anc) for q in supp]
        else:
            gates.append(qsim.GateOp(qsim.H, (anc,)))
            gates += [_cnot(anc, q) for q in supp]
            gates.append(qsim.GateOp(qsim.H, (anc,)))
    return GateSequence("Chk", 2 * N - 1 if N > 1 else 1, gates)


def transversal_sequence(gate: str, params: CodeParams) -> GateSequence:
    N = params.N
    if gate == "H":
        return GateSequence("H", N, [qsim.GateOp(qsim.H, (q,)) for q in range(N)])
    if gate == "P":
        phys = SDG if params.kappa % 2 == 1 else qsim.P
        return GateSequence("P", N, [qsim.GateOp(phys, (q,)) for q in range(N)])
    if gate == "X":
        return GateSequence("X", N, [qsim.GateOp(qsim.X, (q,)) for q in range(N)])
    if gate == "CNOT":
        return GateSequence("CNOT", 2 * N, [_cnot(q, N + q) for q in range(N)], logical_wires=2)
    if gate == "CZ":
        return GateSequence("CZ", 2 * N, [qsim.GateOp(qsim.CZ, (q, N + q)) for q in range(N)], logical_wires=2)
    if gate == "T":
        correction = {
            "kind": "measure-and-fix",
            "measure": "logical Z of the magic block (qubits N..2N-1)",
            "on_outcome_1": "logical P on the data block",
        }
        return GateSequence("T", 2 * N, [_cnot(q, N + q) for q in range(N)], magic_blocks=1, correction=correction)
    raise ValueError(f"unsupported logical gate {gate!r}")


def magic_arity(gate: str) -> int:
    return 1 if gate == "T" else 0


# ---------------------------------------------------------------------------
# dense helpers (kappa <= 1)


def _require_numeric(params: CodeParams) -> None:
    if params.kappa > MAX_NUMERIC_KAPPA:
        raise qsim.CapacityError(f"dense code paths support kappa <= {MAX_NUMERIC_KAPPA}")


def encode_vector(logical: np.ndarray, blocks: int, params: CodeParams) -> np.ndarray:
    """Enc applied blockwise to a ``blocks``-qubit logical vector."""
    _require_numeric(params)
    N = params.N
    n = blocks * N
    if n > qsim.MAX_PURE_QUBITS:
        raise qsim.CapacityError("encoded register too large")
    psi = qsim.embed_vector(np.asarray(logical, dtype=complex), [b * N for b in range(blocks)], n)
    for b in range(blocks):
        for g in _encoder_gates(params.kappa, b * N):
            psi = qsim.apply_matrix(psi, g.matrix, g.targets, n)
    return psi


def encode_density(rho: np.ndarray, blocks: int, params: CodeParams) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    out = 0
    for p, vec in zip(w, v.T):
        if p > 1e-14:
            e = encode_vector(vec, blocks, params)
            out = out + p * np.outer(e, e.conj())
    return out


def magic_state() -> np.ndarray:
    return qsim.T @ np.array([1, 1], dtype=complex) / np.sqrt(2)


def t_correction_branches(psi: np.ndarray, params: CodeParams) -> list:
    """Apply the T-gadget fix-up to a 2N-qubit vector.

    Decodes the magic block, measures its leader qubit and applies logical P
    to the data block on outcome 1.  Returns ``[(prob, data_block_vector)]``
    with the (re-encoded, then discarded) magic block traced out; the magic
    block is left in Enc(T|+>) or Enc(T^dag|->) up to phase, a product state.
    """
    _require_numeric(params)
    N = params.N
    n = 2 * N
    for g in decoding_sequence(params).gates:
        psi = qsim.apply_matrix(psi, g.matrix, tuple(N + q for q in g.targets), n)
    fix = transversal_sequence("P", params)
    out = []
    for bit, proj in enumerate((qsim.PROJ0, qsim.PROJ1)):
        v = qsim.apply_matrix(psi, proj, (N,), n)
        p = float(np.vdot(v, v).real)
        if p < 1e-14:
            continue
        if bit == 1:
            for g in fix.gates:
                v = qsim.apply_matrix(v, g.matrix, g.targets, n)
        data = qsim.reduced_from_vector(v / np.sqrt(p), list(range(N)), n)
        out.append((p, data))
    return out


def spanning_inputs(wires: int) -> list[np.ndarray]:
    """Product states over {|0>, |1>, |+>, |+i>}; they span all wires-qubit operators."""
    singles = [
        np.array([1, 0], dtype=complex),
        np.array([0, 1], dtype=complex),
        np.array([1, 1], dtype=complex) / np.sqrt(2),
        np.array([1, 1j], dtype=complex) / np.sqrt(2),
    ]
    return [qsim.kron_all([v[:, None] for v in combo]).reshape(-1) for combo in itertools.product(singles, repeat=wires)]


def _full_logical(gate: str, logical: np.ndarray) -> np.ndarray:
    if magic_arity(gate):
        return np.kron(logical, magic_state())
    return logical


@functools.lru_cache(maxsize=16)
def _basis_trajectories(gate: str, kappa: int) -> np.ndarray:
    """Encoded logical basis states at every step: (2^wires, steps+1, 2^n)."""
    params = CodeParams(kappa)
    seq = transversal_sequence(gate, params)
    blocks = seq.logical_wires + seq.magic_blocks
    d = 2**seq.logical_wires
    traj = []
    for vec in np.eye(d, dtype=complex):
        psi = encode_vector(_full_logical(gate, vec), blocks, params)
        rows = [psi]
        for g in seq.gates:
            psi = qsim.apply_matrix(psi, g.matrix, g.targets, seq.num_qubits)
            rows.append(psi)
        traj.append(np.stack(rows))
    return np.stack(traj)


def cross_blocks(basis: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """C[j, :, l, :] = Tr_rest |E_j><E_l| on ``keep`` for a stack of vectors E_j."""
    d, k = basis.shape[0], len(keep)
    y = basis[:, _gather_index(tuple(keep), n)].reshape(d * 2**k, -1)
    return (y @ y.conj().T).reshape(d, 2**k, d, 2**k)


@functools.lru_cache(maxsize=4096)
def _gather_index(keep: tuple, n: int) -> np.ndarray:
    """Flat index i -> position of basis state i when qubits are reordered keep + rest."""
    rest = [q for q in range(n) if q not in keep]
    idx = np.arange(2**n).reshape((2,) * n).transpose(list(keep) + rest)
    return idx.reshape(-1)


def batch_reduced(psis: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Reduced density matrices of a batch of pure vectors, shape (B, 2^k, 2^k)."""
    keep = tuple(keep)
    b = psis.shape[0]
    tens = psis[:, _gather_index(keep, n)].reshape(b, 2 ** len(keep), -1)
    return np.matmul(tens, tens.conj().transpose(0, 2, 1))


def _check_blocks(S: Sequence[int], N: int, bound: int) -> None:
    counts = {}
    for q in S:
        counts[q // N] = counts.get(q // N, 0) + 1
    worst = max(counts.values(), default=0)
    if worst > bound:
        raise ValueError(f"subset has {worst} qubits in one block; the bound is {bound}")


def sim_marginal(gate: str, t: int, S: Sequence[int], params: CodeParams, atol: float = 1e-9) -> np.ndarray:
    """The sigma-independent marginal on S after t steps of the logical gate.

    S holds physical indices over the (logical + magic) blocks, ascending.
    """
    _require_numeric(params)
    S = sorted(S)
    seq = transversal_sequence(gate, params)
    if not 0 <= t <= len(seq):
        raise ValueError(f"step {t} outside [0, {len(seq)}]")
    if any(not 0 <= q < seq.num_qubits for q in S):
        raise ValueError("subset outside the register")
    _check_blocks(S, params.N, params.block_bound(t))
    if not S:
        return np.ones((1, 1), dtype=complex)
    # the marginal of Enc(v) is sum_jl v_j v_l^* C[j, l]; evaluate it on the spanning inputs
    gram = cross_blocks(_basis_trajectories(gate, params.kappa)[:, t], S, seq.num_qubits)
    span = np.stack(spanning_inputs(seq.logical_wires))
    marg = np.einsum("sj,jakb,sk->sab", span, gram, span.conj())
    spread = np.abs(marg - marg[0]).max()
    if spread > atol:
        raise NonSimulable(f"{gate} step {t} on {S}: marginals differ by {spread:.3g}")
    return marg[0]


def sim_marginal_blocks(n: int, S: Sequence[int], params: CodeParams) -> np.ndarray:
    """Enc(sigma)_S for any n-qubit sigma, as a tensor of per-block marginals."""
    N = params.N
    S = sorted(S)
    if any(not 0 <= q < n * N for q in S):
        raise ValueError("subset outside the register")
    parts = []
    for b in range(n):
        local = [q - b * N for q in S if b * N <= q < (b + 1) * N]
        if local:
            parts.append(sim_marginal("H", 0, local, params))
    return qsim.kron_all(parts)


def cross_operator(phi: np.ndarray, psi: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Tr_{complement of keep} |phi><psi| (an operator, not a state)."""
    keep = list(keep)
    rest = [q for q in range(n) if q not in keep]
    a = phi.reshape((2,) * n).transpose(keep + rest).reshape(2 ** len(keep), -1)
    b = psi.reshape((2,) * n).transpose(keep + rest).reshape(2 ** len(keep), -1)
    return a @ b.conj().T


def cross_term_norm(a: str, b: str, S: Sequence[int], params: CodeParams) -> float:
    if len(a) != len(b):
        raise ValueError("bitstrings must have equal length")
    n = len(a)
    ea = encode_vector(qsim.PureState.basis(a).amplitudes, n, params)
    eb = encode_vector(qsim.PureState.basis(b).amplitudes, n, params)
    op = cross_operator(ea, eb, sorted(S), n * params.N)
    return float(np.abs(op).max())
