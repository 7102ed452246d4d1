"""Feynman-Kitaev history states and history Hamiltonians.

Register layout: the T clock qubits come first (clock position p is the
(p+1)-th clock qubit), followed by the state register, which is the n1 witness
qubits followed by the n2 ancilla qubits.

Every term is stored as a list of ``Piece`` objects.  A piece is
``coeff * |ket><bra|_{clock positions} (x) op_{state targets}``.  The same
term can then be applied either to a vector on the full register or to a
vector restricted to the T+1 legal clock states ``unary(t)``.

The clock-restricted ("legal") sector is exact for the minimum eigenvalue of
everything built here.  No piece changes the number of ``01`` patterns in a
clock string, so the Hamiltonian is block diagonal in that count.  Every
block with at least one ``01`` pattern has energy >= 1 from the stabilizer
terms, and the legal block always has an eigenvalue <= 1 (the history states
of any accepting or rejecting run).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import qsim


@dataclass(frozen=True)
class Piece:
    clock: tuple
    ket: tuple
    bra: tuple
    coeff: complex
    op: np.ndarray | None = None
    targets: tuple = ()


@dataclass
class Term:
    kind: str  # prop, stab, in, out
    index: int
    pieces: list
    info: dict = field(default_factory=dict)

    @property
    def clock_support(self) -> tuple:
        return tuple(sorted({p for pc in self.pieces for p in pc.clock}))

    @property
    def state_support(self) -> tuple:
        return tuple(sorted({q for pc in self.pieces for q in pc.targets}))

    def support(self, T: int) -> tuple:
        """Global qubit indices (clock first, then state offset by T)."""
        return self.clock_support + tuple(T + q for q in self.state_support)

    def local_matrix(self) -> np.ndarray:
        """Dense matrix on ``clock_support + state_support`` (that order)."""
        cs, ss = self.clock_support, self.state_support
        nl = len(cs) + len(ss)
        out = np.zeros((2**nl, 2**nl), dtype=complex)
        eye = np.eye(2**nl, dtype=complex)
        for pc in self.pieces:
            c = len(pc.clock)
            cm = np.zeros((2**c, 2**c), dtype=complex)
            cm[_bits_to_int(pc.ket), _bits_to_int(pc.bra)] = 1.0
            if pc.op is not None and pc.targets:
                mat = np.kron(cm, pc.op)
                tgt = [cs.index(p) for p in pc.clock] + [len(cs) + ss.index(q) for q in pc.targets]
            else:
                scale = 1.0 if pc.op is None else pc.op[0, 0]
                mat = cm * scale
                tgt = [cs.index(p) for p in pc.clock]
            out += pc.coeff * qsim.apply_matrix(eye, mat, tgt, nl).T
        return out


def _bits_to_int(bits) -> int:
    v = 0
    for b in bits:
        v = 2 * v + int(b)
    return v


@dataclass
class UnitarySequence:
    steps: list  # list of qsim.GateOp on state-register indices
    n1: int
    n2: int
    partition: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.steps) < 2:
            raise ValueError("T >= 2 is required; pad length-1 sequences with an identity step")
        flat = [q for s in self.partition for q in s]
        if sorted(flat) != list(range(self.n2)):
            raise ValueError("partition must be a disjoint cover of the ancilla register")
        ns = self.n1 + self.n2
        for g in self.steps:
            if any(not 0 <= q < ns for q in g.targets):
                raise ValueError("step acts outside the state register")

    @property
    def T(self) -> int:
        return len(self.steps)

    @property
    def n_state(self) -> int:
        return self.n1 + self.n2


def identity_step() -> qsim.GateOp:
    return qsim.GateOp(np.eye(1), ())


# ---------------------------------------------------------------------------
# term constructors


def prop_pieces(t: int, T: int, forward: np.ndarray, targets: Sequence[int], diag: np.ndarray | None = None) -> list:
    """Pieces of the propagation term for step t (1-based).

    ``forward`` is the operator paired with the clock move t-1 -> t and
    ``diag`` (default identity) multiplies both diagonal projectors.  The two
    boundary terms use two clock qubits so that the term is a projector on the
    whole clock space and not only on its legal part.
    """
    targets = tuple(targets)
    back = forward.conj().T
    dtg = targets if diag is not None else ()
    if T == 1:
        clock, a, b = (0,), (0,), (1,)
    elif t == 1:
        clock, a, b = (0, 1), (0, 0), (1, 0)
    elif t == T:
        clock, a, b = (T - 2, T - 1), (1, 0), (1, 1)
    else:
        clock, a, b = (t - 2, t - 1, t), (1, 0, 0), (1, 1, 0)
    return [
        Piece(clock, a, a, 0.5, diag, dtg),
        Piece(clock, b, b, 0.5, diag, dtg),
        Piece(clock, b, a, -0.5, forward, targets),
        Piece(clock, a, b, -0.5, back, targets),
    ]


def prop_term(t: int, T: int, step: qsim.GateOp, **info) -> Term:
    return Term("prop", t, prop_pieces(t, T, step.matrix, step.targets), dict(info))


def stab_term(t: int) -> Term:
    return Term("stab", t, [Piece((t - 1, t), (0, 1), (0, 1), 1.0)])


def in_term(i: int, targets: Sequence[int]) -> Term:
    targets = tuple(targets)
    d = 2 ** len(targets)
    op = np.eye(d, dtype=complex)
    op[0, 0] = 0.0
    return Term("in", i, [Piece((0,), (0,), (0,), 1.0, op, targets)])


def out_term(reject: np.ndarray, targets: Sequence[int], T: int) -> Term:
    """``reject (x) |1><1|_clock(T)``; ``reject`` is I minus the accepting projector."""
    return Term("out", 1, [Piece((T - 1,), (1,), (1,), 1.0, np.asarray(reject, dtype=complex), tuple(targets))])


# ---------------------------------------------------------------------------
# Hamiltonian container and matrix-free application


class HistoryHamiltonian:
    def __init__(self, T: int, n1: int, n2: int, terms: list):
        self.T, self.n1, self.n2 = T, n1, n2
        self.terms = list(terms)
        self._legal_maps = {}

    @property
    def n_state(self) -> int:
        return self.n1 + self.n2

    @property
    def num_qubits(self) -> int:
        return self.T + self.n_state

    def count(self, kind: str | None = None) -> int:
        return len(self.terms) if kind is None else sum(t.kind == kind for t in self.terms)

    # full register
    def apply_piece_full(self, pc: Piece, psi: np.ndarray) -> np.ndarray:
        T, ns = self.T, self.n_state
        tens = psi.reshape((2,) * T + (2**ns,))
        src = [slice(None)] * T
        dst = [slice(None)] * T
        for p, kb, bb in zip(pc.clock, pc.ket, pc.bra):
            src[p], dst[p] = bb, kb
        sub = tens[tuple(src)]
        if pc.op is not None:
            sub = qsim.apply_matrix(sub, pc.op, pc.targets, ns) if pc.targets else sub * pc.op[0, 0]
        out = np.zeros_like(tens)
        out[tuple(dst)] = pc.coeff * sub
        return out.reshape(-1)

    def piece_expectation(self, pc: Piece, psi: np.ndarray) -> complex:
        """<psi| piece |psi> without materialising the full output vector."""
        T, ns = self.T, self.n_state
        tens = psi.reshape((2,) * T + (2**ns,))
        src = [slice(None)] * T
        dst = [slice(None)] * T
        for p, kb, bb in zip(pc.clock, pc.ket, pc.bra):
            src[p], dst[p] = bb, kb
        sub = tens[tuple(src)]
        if pc.op is not None:
            sub = qsim.apply_matrix(sub, pc.op, pc.targets, ns) if pc.targets else sub * pc.op[0, 0]
        return pc.coeff * np.vdot(tens[tuple(dst)], sub)

    def term_expectation(self, term: Term, psi: np.ndarray) -> float:
        return float(sum(self.piece_expectation(pc, psi) for pc in term.pieces).real)

    def apply_term_full(self, term: Term, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for pc in term.pieces:
            out += self.apply_piece_full(pc, psi)
        return out

    def apply_full(self, psi: np.ndarray) -> np.ndarray:
        out = np.zeros_like(psi)
        for term in self.terms:
            out += self.apply_term_full(term, psi)
        return out

    # legal clock sector: arrays of shape (T+1, 2^n_state)
    def _legal_map(self, pc: Piece):
        key = id(pc)
        if key not in self._legal_maps:
            src, dst = [], []
            for t in range(self.T + 1):
                bits = [1 if p < t else 0 for p in range(self.T)]
                if any(bits[p] != b for p, b in zip(pc.clock, pc.bra)):
                    continue
                for p, b in zip(pc.clock, pc.ket):
                    bits[p] = b
                t2 = sum(bits)
                if bits != [1] * t2 + [0] * (self.T - t2):
                    raise AssertionError("piece maps a legal clock state outside the legal sector")
                src.append(t)
                dst.append(t2)
            self._legal_maps[key] = (pc, np.array(src, dtype=int), np.array(dst, dtype=int))
        return self._legal_maps[key][1:]

    def apply_piece_legal(self, pc: Piece, arr: np.ndarray, out: np.ndarray) -> None:
        src, dst = self._legal_map(pc)
        if len(src) == 0:
            return
        sub = arr[src]
        if pc.op is not None:
            sub = qsim.apply_matrix(sub, pc.op, pc.targets, self.n_state) if pc.targets else sub * pc.op[0, 0]
        out[dst] += pc.coeff * sub

    def apply_term_legal(self, term: Term, arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        for pc in term.pieces:
            self.apply_piece_legal(pc, arr, out)
        return out

    def apply_legal(self, arr: np.ndarray) -> np.ndarray:
        out = np.zeros_like(arr)
        for term in self.terms:
            for pc in term.pieces:
                self.apply_piece_legal(pc, arr, out)
        return out

    def legal_to_full(self, arr: np.ndarray) -> np.ndarray:
        if self.num_qubits > qsim.MAX_PURE_QUBITS:
            raise qsim.CapacityError("full register exceeds the pure-state limit")
        full = np.zeros((2**self.T, 2**self.n_state), dtype=complex)
        for t in range(self.T + 1):
            full[unary_index(t, self.T)] = arr[t]
        return full.reshape(-1)

    def full_to_legal(self, psi: np.ndarray) -> np.ndarray:
        tens = psi.reshape(2**self.T, 2**self.n_state)
        return np.stack([tens[unary_index(t, self.T)] for t in range(self.T + 1)])


def unary_index(t: int, T: int) -> int:
    return ((1 << t) - 1) << (T - t)


def unary_clock(t: int, T: int) -> qsim.PureState:
    if not 0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    return qsim.PureState.basis("1" * t + "0" * (T - t))


def build_history_hamiltonian(seq: UnitarySequence) -> HistoryHamiltonian:
    T = seq.T
    terms = [prop_term(t, T, seq.steps[t - 1]) for t in range(1, T + 1)]
    terms += [stab_term(t) for t in range(1, T)]
    terms += [in_term(i + 1, [seq.n1 + q for q in s]) for i, s in enumerate(seq.partition)]
    return HistoryHamiltonian(T, seq.n1, seq.n2, terms)


def with_out_term(H: HistoryHamiltonian, reject: np.ndarray, targets: Sequence[int]) -> HistoryHamiltonian:
    return HistoryHamiltonian(H.T, H.n1, H.n2, H.terms + [out_term(reject, targets, H.T)])


# ---------------------------------------------------------------------------
# history states


def _initial_vector(seq: UnitarySequence, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=complex).reshape(-1)
    if phi.shape != (2**seq.n1,):
        raise ValueError("witness dimension mismatch")
    anc = np.zeros(2**seq.n2, dtype=complex)
    anc[0] = 1.0
    return np.kron(phi, anc)


def history_legal(seq: UnitarySequence, phi) -> np.ndarray:
    """History state in the legal sector, shape (T+1, 2^n_state)."""
    amps = phi.amplitudes if isinstance(phi, qsim.PureState) else phi
    psi = _initial_vector(seq, amps)
    rows = [psi]
    for g in seq.steps:
        psi = qsim.apply_matrix(psi, g.matrix, g.targets, seq.n_state)
        rows.append(psi)
    return np.stack(rows) / np.sqrt(seq.T + 1)


def history_state(seq: UnitarySequence, phi: qsim.PureState) -> qsim.PureState:
    if phi.num_qubits != seq.n1:
        raise ValueError("witness dimension mismatch")
    n = seq.T + seq.n_state
    if n > qsim.MAX_PURE_QUBITS:
        raise qsim.CapacityError(f"history state needs {n} qubits")
    legal = history_legal(seq, phi)
    full = np.zeros((2**seq.T, 2**seq.n_state), dtype=complex)
    for t in range(seq.T + 1):
        full[unary_index(t, seq.T)] = legal[t]
    return qsim.PureState(n, full.reshape(-1))


def _vector(psi) -> np.ndarray:
    return psi.amplitudes if isinstance(psi, qsim.PureState) else np.asarray(psi)


def energy(H: HistoryHamiltonian, psi) -> float:
    v = _vector(psi)
    if v.shape[0] != 2**H.num_qubits:
        raise ValueError("dimension mismatch")
    return float(sum(H.term_expectation(term, v) for term in H.terms))


def term_energies(H: HistoryHamiltonian, psi) -> list[float]:
    v = _vector(psi)
    return [H.term_expectation(term, v) for term in H.terms]


def history_subspace_distance(seq: UnitarySequence, psi) -> float:
    """Trace distance from psi to the closest history state, sqrt(1 - |W^dag psi|^2)."""
    v = _vector(psi)
    T, ns = seq.T, seq.n_state
    if v.shape[0] != 2 ** (T + ns):
        raise ValueError("dimension mismatch")
    tens = v.reshape(2**T, 2**ns)
    acc = np.zeros(2**ns, dtype=complex)
    for t in range(T, -1, -1):
        # acc holds sum_{s>t} U_{[t+1,s]}^dag <unary(s)|psi>; fold in step t+1 lazily
        acc = acc + tens[unary_index(t, T)]
        if t > 0:
            g = seq.steps[t - 1]
            acc = qsim.apply_matrix(acc, g.matrix.conj().T, g.targets, ns)
    w = acc.reshape(2**seq.n1, 2**seq.n2)[:, 0] / np.sqrt(T + 1)
    # 1 - |w|^2 = |psi - W W^dag psi|^2; the residual form avoids cancellation
    proj = history_legal(seq, w)
    legal_rows = [unary_index(t, T) for t in range(T + 1)]
    off = np.ones(2**T, dtype=bool)
    off[legal_rows] = False
    r2 = float(np.linalg.norm(tens[off]) ** 2 + np.linalg.norm(tens[legal_rows] - proj) ** 2)
    return float(np.sqrt(r2))


# ---------------------------------------------------------------------------
# Lanczos


class ConvergenceError(RuntimeError):
    pass


def lanczos_min(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    tol: float = 1e-10,
    seed: int | None = 0,
    v0: np.ndarray | None = None,
    krylov: int = 200,
    max_cycles: int = 60,
    max_breakdowns: int = 5,
):
    """Smallest eigenpair of a Hermitian operator given only ``matvec``.

    Lanczos with full (twice-applied) reorthogonalisation and explicit
    restarts from the current Ritz vector.  When the Krylov space becomes
    invariant early, it is extended by a fresh random vector orthogonal to
    the basis, at most ``max_breakdowns`` times per cycle.  Convergence means
    ``|Hv - lambda v| <= tol * max(1, |H|_est)``.
    """
    rng = np.random.default_rng(seed)
    m = min(krylov, dim)

    def rand_vec():
        x = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return x / np.linalg.norm(x)

    v = rand_vec() if v0 is None else np.asarray(v0, dtype=complex).reshape(-1) / np.linalg.norm(v0)
    norm_est = 0.0
    best = None
    for _ in range(max_cycles):
        basis = np.zeros((m, dim), dtype=complex)
        alphas, betas = [], []
        basis[0] = v
        breakdowns = 0
        j = 0
        while True:
            w = matvec(basis[j])
            a = float(np.vdot(basis[j], w).real)
            alphas.append(a)
            w = w - a * basis[j]
            if j > 0:
                w = w - betas[-1] * basis[j - 1]
            for _rep in range(2):
                w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
            b = float(np.linalg.norm(w))
            norm_est = max(norm_est, abs(a) + b)
            if j + 1 >= m:
                break
            if b < 1e-12 * max(1.0, norm_est):
                if breakdowns >= max_breakdowns or j + 1 >= dim:
                    break
                breakdowns += 1
                w = rand_vec()
                for _rep in range(2):
                    w -= basis[: j + 1].T @ (basis[: j + 1].conj() @ w)
                w /= np.linalg.norm(w)
                betas.append(0.0)
            else:
                w /= b
                betas.append(b)
            basis[j + 1] = w
            j += 1
            # cheap convergence test on the tridiagonal problem every few steps
            if j % 10 == 0:
                theta, y = _tridiag_min(alphas, betas[: j - 1] if len(betas) >= j else betas)
                if abs(betas[-1] * y[-1]) < 0.1 * tol * max(1.0, norm_est):
                    break
        k = len(alphas)
        theta, y = _tridiag_min(alphas, betas[: k - 1])
        x = basis[:k].T @ y
        x /= np.linalg.norm(x)
        r = float(np.linalg.norm(matvec(x) - theta * x))
        if best is None or r < best[2]:
            best = (theta, x, r)
        if r <= tol * max(1.0, norm_est):
            return float(theta), x
        v = x
    raise ConvergenceError(f"Lanczos did not converge: residual {best[2]:.3g} (lambda ~ {best[0]:.6g})")


def _tridiag_min(alphas, betas):
    k = len(alphas)
    tri = np.diag(np.array(alphas, dtype=float))
    if k > 1:
        off = np.array(betas[: k - 1], dtype=float)
        tri += np.diag(off, 1) + np.diag(off, -1)
    w, v = np.linalg.eigh(tri)
    return float(w[0]), v[:, 0]


def min_eigenvalue(H: HistoryHamiltonian, tol: float = 1e-10, sector: str = "legal", seed: int | None = 0):
    """Smallest eigenvalue of the summed terms and its eigenvector.

    ``sector="legal"`` works on the (T+1) * 2^n_state legal-clock block, which
    holds the global minimum (see module docstring); the vector is returned in
    that basis (use ``H.legal_to_full`` to embed it).  ``sector="full"`` uses
    the whole register and returns a flat vector.
    """
    if sector == "legal":
        shape = (H.T + 1, 2**H.n_state)
        dim = shape[0] * shape[1]
        lam, x = lanczos_min(lambda v: H.apply_legal(v.reshape(shape)).reshape(-1), dim, tol=tol, seed=seed)
        return lam, x.reshape(shape)
    if sector == "full":
        if H.num_qubits > qsim.MAX_PURE_QUBITS:
            raise qsim.CapacityError("full register exceeds the pure-state limit")
        return lanczos_min(H.apply_full, 2**H.num_qubits, tol=tol, seed=seed)
    raise ValueError(f"unknown sector {sector!r}")
