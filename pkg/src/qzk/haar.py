"""Haar-random oracle unitaries with query counting."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import qsim

MAX_LAMBDA = 8


def haar_matrix(dim: int, rng: np.random.Generator) -> np.ndarray:
    # Ginibre matrix -> QR -> fix the phases of R's diagonal so the
    # distribution is exactly Haar and not biased by the QR convention.
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


@dataclass
class OracleHandle:
    """A sampled lambda-qubit unitary G plus a running query count."""

    lam: int
    matrix: np.ndarray
    seed: int | None = None
    queries: int = 0

    @property
    def dagger(self) -> np.ndarray:
        return self.matrix.conj().T

    def apply_raw(self, psi: np.ndarray, targets: Sequence[int], n: int, inverse: bool = False, mixed: bool = False):
        """Apply G (or G^dagger) to a bare array and count the query."""
        if len(targets) != self.lam:
            raise ValueError(f"oracle acts on {self.lam} qubits, got {len(targets)} targets")
        u = self.dagger if inverse else self.matrix
        self.queries += 1
        if mixed:
            return qsim.apply_matrix_rho(psi, u, targets, n)
        return qsim.apply_matrix(psi, u, targets, n)


def sample_haar(lam: int, seed: int | None = None) -> OracleHandle:
    if not 1 <= lam <= MAX_LAMBDA:
        raise ValueError(f"lambda must be in [1, {MAX_LAMBDA}], got {lam}")
    rng = np.random.default_rng(seed)
    return OracleHandle(lam, haar_matrix(2**lam, rng), seed)


def query(handle: OracleHandle, state: qsim.State, targets: Sequence[int], inverse: bool = False) -> qsim.State:
    if len(targets) != handle.lam:
        raise ValueError(f"oracle acts on {handle.lam} qubits, got {len(targets)} targets")
    u = handle.dagger if inverse else handle.matrix
    out = qsim.apply_gate(state, qsim.GateOp(u, tuple(targets)))
    handle.queries += 1
    return out
