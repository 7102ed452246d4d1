"""Dense state-vector and density-matrix simulation.

Qubit 0 is the most significant bit of a basis index, so a state on n qubits
reshapes to an n-axis tensor whose axis i is qubit i.  Pure states are capped
at 24 qubits and density matrices at 13 qubits.

The module has two layers.  The typed layer (PureState, MixedState, GateOp and
the functions taking them) validates its inputs.  The raw layer
(``apply_matrix`` and friends) works on bare arrays and is what the heavier
modules use in their inner loops.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from scipy.linalg import blas

MAX_PURE_QUBITS = 24
MAX_MIXED_QUBITS = 13
ATOL = 1e-9


class CapacityError(ValueError):
    """Raised when a register exceeds the dense simulation limits."""


# ---------------------------------------------------------------------------
# raw layer


def apply_matrix(psi: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Apply a 2^t x 2^t matrix to ``targets`` of a flat n-qubit vector.

    ``psi`` may carry leading batch axes: its shape is ``batch + (2**n,)``.
    No unitarity check; this is also how projectors and effects are applied.
    """
    targets = list(targets)
    t = len(targets)
    if t == 0:
        return psi * op[0, 0]
    batch = psi.shape[:-1]
    nb = len(batch)
    tens = psi.reshape(batch + (2,) * n)
    gate = op.reshape((2,) * (2 * t))
    axes = [nb + q for q in targets]
    out = np.tensordot(gate, tens, axes=(list(range(t, 2 * t)), axes))
    # tensordot puts the gate's output axes first; move them back in place
    out = np.moveaxis(out, list(range(t)), axes)
    return out.reshape(batch + (2**n,))


def apply_matrix_rho(rho: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Return op rho op^dagger for a 2^n x 2^n density matrix."""
    left = apply_matrix(rho.T, op, targets, n).T
    return apply_matrix(left.conj(), op, targets, n).conj()


def reduced_from_vector(psi: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Reduced density matrix of a pure vector on ``keep`` (in the given order)."""
    keep = list(keep)
    if keep == sorted(keep):
        # merge runs of adjacent qubits so the transpose has few axes
        dims, kept = [], []
        for q in range(n):
            flag = q in keep
            if kept and kept[-1] == flag:
                dims[-1] *= 2
            else:
                dims.append(2)
                kept.append(flag)
        axes = [a for a, f in enumerate(kept) if f] + [a for a, f in enumerate(kept) if not f]
        tens = psi.reshape(dims).transpose(axes).reshape(2 ** len(keep), -1)
    else:
        rest = [q for q in range(n) if q not in keep]
        tens = psi.reshape((2,) * n).transpose(keep + rest).reshape(2 ** len(keep), -1)
    if tens.shape[1] < 2**12 or tens.dtype != np.complex128:
        return tens @ tens.conj().T
    # Hermitian rank-k update: half the work of the general product
    upper = blas.zherk(1.0, np.asarray(tens).T, trans=2).conj()
    return np.triu(upper) + np.triu(upper, 1).conj().T


def reduced_from_rho(rho: np.ndarray, keep: Sequence[int], n: int) -> np.ndarray:
    """Partial trace of a density matrix onto ``keep`` (in the given order)."""
    keep = list(keep)
    rest = [q for q in range(n) if q not in keep]
    k, r = len(keep), len(rest)
    tens = rho.reshape((2,) * (2 * n))
    perm = keep + rest + [n + q for q in keep] + [n + q for q in rest]
    tens = tens.transpose(perm).reshape(2**k, 2**r, 2**k, 2**r)
    return np.einsum("arbr->ab", tens)


def expectation_vector(psi: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> complex:
    return complex(np.vdot(psi, apply_matrix(psi, op, targets, n)))


def embed_vector(sub: np.ndarray, positions: Sequence[int], n: int) -> np.ndarray:
    """Place a len(positions)-qubit vector at ``positions`` with |0> elsewhere."""
    positions = list(positions)
    k = len(positions)
    full = np.zeros((2**k, 2 ** (n - k)), dtype=complex)
    full[:, 0] = sub
    rest = [q for q in range(n) if q not in positions]
    order = positions + rest
    tens = full.reshape((2,) * n)
    return np.moveaxis(tens, list(range(n)), order).reshape(-1)


def embed_rho(sub: np.ndarray, positions: Sequence[int], n: int) -> np.ndarray:
    positions = list(positions)
    k = len(positions)
    full = np.zeros((2**k, 2 ** (n - k), 2**k, 2 ** (n - k)), dtype=complex)
    full[:, 0, :, 0] = sub
    rest = [q for q in range(n) if q not in positions]
    order = positions + rest
    tens = full.reshape((2,) * (2 * n))
    tens = np.moveaxis(tens, list(range(2 * n)), order + [n + q for q in order])
    return tens.reshape(2**n, 2**n)


def kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def trace_distance_matrices(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of a - b (both Hermitian)."""
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def is_unitary(u: np.ndarray, atol: float = ATOL) -> bool:
    return bool(np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol))


# ---------------------------------------------------------------------------
# typed layer


def _check_pure_size(n: int) -> None:
    if n < 0:
        raise ValueError("negative qubit count")
    if n > MAX_PURE_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the pure-state limit of {MAX_PURE_QUBITS}")


def _check_mixed_size(n: int) -> None:
    if n < 0:
        raise ValueError("negative qubit count")
    if n > MAX_MIXED_QUBITS:
        raise CapacityError(f"{n} qubits exceeds the density-matrix limit of {MAX_MIXED_QUBITS}")


@dataclass(frozen=True)
class PureState:
    num_qubits: int
    amplitudes: np.ndarray
    labels: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        _check_pure_size(self.num_qubits)
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.shape != (2**self.num_qubits,):
            raise ValueError(f"expected {2**self.num_qubits} amplitudes, got {amps.shape[0]}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"state is not normalised (norm {norm:.3g})")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n: int) -> "PureState":
        _check_pure_size(n)
        amps = np.zeros(2**n, dtype=complex)
        amps[0] = 1.0
        return cls(n, amps)

    @classmethod
    def basis(cls, bits: str) -> "PureState":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2) if bits else 0] = 1.0
        return cls(len(bits), amps)

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def to_mixed(self) -> "MixedState":
        return MixedState(self.num_qubits, self.density())


@dataclass(frozen=True)
class MixedState:
    num_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        _check_mixed_size(self.num_qubits)
        rho = np.asarray(self.matrix, dtype=complex)
        d = 2**self.num_qubits
        if rho.shape != (d, d):
            raise ValueError(f"expected a {d}x{d} matrix, got {rho.shape}")
        if not np.allclose(rho, rho.conj().T, atol=1e-8):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > 1e-8:
            raise ValueError("density matrix does not have unit trace")
        object.__setattr__(self, "matrix", rho)


State = Union[PureState, MixedState]


@dataclass(frozen=True)
class GateOp:
    """A unitary on an ordered list of qubits."""

    matrix: np.ndarray
    targets: tuple

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        targets = tuple(int(q) for q in self.targets)
        if len(set(targets)) != len(targets):
            raise ValueError("duplicate target qubits")
        if mat.shape != (2 ** len(targets), 2 ** len(targets)):
            raise ValueError("gate dimension does not match its target count")
        if not is_unitary(mat):
            raise ValueError("gate matrix is not unitary")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "targets", targets)

    def dagger(self) -> "GateOp":
        return GateOp(self.matrix.conj().T, self.targets)


def _check_targets(targets: Sequence[int], n: int) -> None:
    for q in targets:
        if not 0 <= q < n:
            raise ValueError(f"target {q} out of range for {n} qubits")
    if len(set(targets)) != len(targets):
        raise ValueError("duplicate target qubits")


def apply_gate(state: State, gate: GateOp) -> State:
    _check_targets(gate.targets, state.num_qubits)
    if isinstance(state, PureState):
        return PureState(state.num_qubits, apply_matrix(state.amplitudes, gate.matrix, gate.targets, state.num_qubits))
    return MixedState(state.num_qubits, apply_matrix_rho(state.matrix, gate.matrix, gate.targets, state.num_qubits))


def partial_trace(state: State, keep: Sequence[int]) -> MixedState:
    """Reduced state on ``keep``; the result lists qubits in ascending order."""
    keep = sorted(keep)
    _check_targets(keep, state.num_qubits)
    _check_mixed_size(len(keep))
    if isinstance(state, PureState):
        return MixedState(len(keep), reduced_from_vector(state.amplitudes, keep, state.num_qubits))
    return MixedState(len(keep), reduced_from_rho(state.matrix, keep, state.num_qubits))


def _as_matrix(state: State) -> np.ndarray:
    return state.density() if isinstance(state, PureState) else state.matrix


def trace_distance(a: State, b: State) -> float:
    if a.num_qubits != b.num_qubits:
        raise ValueError("dimension mismatch")
    return trace_distance_matrices(_as_matrix(a), _as_matrix(b))


def expectation(state: State, op: np.ndarray, targets: Sequence[int]) -> float:
    """Real part of Tr[op rho] with op acting on ``targets`` (order respected)."""
    _check_targets(targets, state.num_qubits)
    n = state.num_qubits
    if isinstance(state, PureState):
        return expectation_vector(state.amplitudes, op, targets, n).real
    return float(np.trace(apply_matrix(state.matrix.T, op, targets, n).T).real)


def _validate_effects(effects: Sequence[np.ndarray], dim: int) -> list[np.ndarray]:
    effects = [np.asarray(e, dtype=complex) for e in effects]
    total = np.zeros((dim, dim), dtype=complex)
    for e in effects:
        if e.shape != (dim, dim):
            raise ValueError("effect has the wrong dimension")
        if not np.allclose(e, e.conj().T, atol=ATOL):
            raise ValueError("effect is not Hermitian")
        if np.linalg.eigvalsh(e).min() < -ATOL:
            raise ValueError("effect is not positive semidefinite")
        total += e
    if not np.allclose(total, np.eye(dim), atol=ATOL):
        raise ValueError("effects do not sum to the identity")
    return effects


def _sqrt_psd(e: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(e)
    w = np.sqrt(np.clip(w, 0.0, None))
    return (v * w) @ v.conj().T


def measure_branches(state: State, targets: Sequence[int], effects: Sequence[np.ndarray]):
    """All Lüders branches of a POVM on ``targets``.

    Returns a list of ``(probability, post_state or None)`` in effect order;
    zero-probability branches carry ``None``.
    """
    targets = list(targets)
    _check_targets(targets, state.num_qubits)
    effects = _validate_effects(effects, 2 ** len(targets))
    n = state.num_qubits
    out = []
    for e in effects:
        k = _sqrt_psd(e)
        if isinstance(state, PureState):
            v = apply_matrix(state.amplitudes, k, targets, n)
            p = float(np.vdot(v, v).real)
            post = PureState(n, v / np.sqrt(p)) if p > 1e-14 else None
        else:
            r = apply_matrix_rho(state.matrix, k, targets, n)
            p = float(np.trace(r).real)
            post = MixedState(n, r / p) if p > 1e-14 else None
        out.append((max(p, 0.0), post))
    return out


def measure(state: State, targets: Sequence[int], effects: Sequence[np.ndarray], rng: np.random.Generator):
    """Sample one POVM outcome; returns ``(outcome, post_state)``."""
    branches = measure_branches(state, targets, effects)
    probs = np.array([p for p, _ in branches])
    probs = probs / probs.sum()
    k = int(rng.choice(len(branches), p=probs))
    return k, branches[k][1]


def computational_effects(t: int) -> list[np.ndarray]:
    """Projectors onto the 2^t computational basis states of t qubits."""
    d = 2**t
    out = []
    for x in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[x, x] = 1.0
        out.append(e)
    return out


def random_pure(n: int, rng: np.random.Generator) -> PureState:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return PureState(n, v / np.linalg.norm(v))


def random_mixed(n: int, rng: np.random.Generator, rank: int | None = None) -> MixedState:
    d = 2**n
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return MixedState(n, rho / np.trace(rho).real)


# standard single- and two-qubit gates
I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1, -1]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
P = np.diag([1, 1j]).astype(complex)
T = np.diag([1, np.exp(1j * np.pi / 4)]).astype(complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
CZ = np.diag([1, 1, 1, -1]).astype(complex)
PROJ0 = np.diag([1, 0]).astype(complex)
PROJ1 = np.diag([0, 1]).astype(complex)


def controlled(u: np.ndarray) -> np.ndarray:
    d = u.shape[0]
    out = np.eye(2 * d, dtype=complex)
    out[d:, d:] = u
    return out
