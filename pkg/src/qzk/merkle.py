"""Quantum Merkle trees over b-qubit node registers.

Nodes are labelled 1..2l-1 with parent(u) = u // 2 and children 2u, 2u+1;
leaves are l..2l-1.  All registers live in one joint state, node u on qubits
(u-1)b .. ub-1.  Leaf l+j carries witness qubit j in its first position.

Committing applies the oracle G to (child, child, parent) for u = l-1 down
to 1.  Opening a set of leaves walks the new part of their root paths from
the root down, applies G^dagger and checks that the parent register returned
to |0^b>.  Only internal nodes on the paths are uncomputed: their children
are exactly the registers in the R-set, so every uncompute has its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import haar, qsim

BOT = None  # decommit failure marker


def _is_power_of_two(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


@dataclass(frozen=True)
class TreeLayout:
    ell: int
    b: int

    def __post_init__(self):
        if not _is_power_of_two(self.ell):
            raise ValueError(f"leaf count {self.ell} is not a power of 2")
        if self.b < 1:
            raise ValueError("b >= 1 is required")

    @property
    def num_nodes(self) -> int:
        return 2 * self.ell - 1

    @property
    def num_qubits(self) -> int:
        return self.num_nodes * self.b

    def regs(self, u: int) -> tuple:
        self._check(u)
        return tuple(range((u - 1) * self.b, u * self.b))

    def leaf(self, j: int) -> int:
        if not 0 <= j < self.ell:
            raise ValueError(f"witness qubit {j} outside [0, {self.ell})")
        return self.ell + j

    def is_leaf(self, u: int) -> bool:
        return self.ell <= u <= self.num_nodes

    def _check(self, u: int) -> None:
        if not 1 <= u <= self.num_nodes:
            raise ValueError(f"node {u} outside [1, {self.num_nodes}]")


def path_set(u: int, ell: int) -> set:
    """u and all its ancestors."""
    if not 1 <= u <= 2 * ell - 1:
        raise ValueError(f"node {u} outside [1, {2 * ell - 1}]")
    out = set()
    while u >= 1:
        out.add(u)
        u //= 2
    return out


def p_set_of(S: Iterable[int], ell: int) -> set:
    out = set()
    for u in S:
        out |= path_set(u, ell)
    return out


def r_set_of(S: Iterable[int], ell: int) -> set:
    """Path nodes plus their in-range children."""
    out = set()
    for v in p_set_of(S, ell):
        out.add(v)
        out |= {c for c in (2 * v, 2 * v + 1) if c <= 2 * ell - 1}
    return out


@dataclass
class CommitmentRegisters:
    layout: TreeLayout
    state: qsim.State
    owner: dict  # node -> "prover" | "verifier"
    uncomputed: set = field(default_factory=set)

    def owned_by(self, who: str) -> set:
        return {u for u, o in self.owner.items() if o == who}

    def transfer(self, nodes: Iterable[int], to: str = "verifier") -> None:
        for u in nodes:
            self.layout._check(u)
            self.owner[u] = to

    def leaf_state(self, leaves: Iterable[int]) -> qsim.MixedState:
        """Reduced state of the first qubit of each given leaf (ascending labels)."""
        return qsim.partial_trace(self.state, [self.layout.regs(u)[0] for u in sorted(leaves)])


def _embed_witness(sigma: qsim.State, lay: TreeLayout) -> qsim.State:
    if sigma.num_qubits != lay.ell:
        raise ValueError(f"witness has {sigma.num_qubits} qubits, the tree has {lay.ell} leaves")
    pos = [lay.regs(lay.leaf(j))[0] for j in range(lay.ell)]
    n = lay.num_qubits
    if isinstance(sigma, qsim.PureState):
        if n > qsim.MAX_PURE_QUBITS:
            raise qsim.CapacityError(f"tree needs {n} qubits")
        return qsim.PureState(n, qsim.embed_vector(sigma.amplitudes, pos, n))
    if n > qsim.MAX_MIXED_QUBITS:
        raise qsim.CapacityError(f"mixed tree needs {n} qubits")
    return qsim.MixedState(n, qsim.embed_rho(sigma.matrix, pos, n))


def _oracle_targets(lay: TreeLayout, u: int) -> tuple:
    return lay.regs(2 * u) + lay.regs(2 * u + 1) + lay.regs(u)


def commit(sigma: qsim.State, N: int, lam: int, oracle: haar.OracleHandle) -> CommitmentRegisters:
    if lam % 3:
        raise ValueError(f"lambda={lam} is not 3b")
    if oracle.lam != lam:
        raise ValueError(f"oracle acts on {oracle.lam} qubits, lambda={lam}")
    lay = TreeLayout(N, lam // 3)
    state = _embed_witness(sigma, lay)
    for u in range(lay.ell - 1, 0, -1):
        state = haar.query(oracle, state, _oracle_targets(lay, u))
    return CommitmentRegisters(lay, state, {u: "prover" for u in range(1, lay.num_nodes + 1)})


@dataclass
class Decommitment:
    ok: bool  # False means the verifier saw a nonzero syndrome
    opened: tuple  # leaf labels returned on success
    zero_probs: list  # per-uncompute probability of the all-zero outcome
    p_bot: float  # exact-mode probability of reaching the failure branch
    queries: int


def _zero_projector(b: int) -> np.ndarray:
    p = np.zeros((2**b, 2**b), dtype=complex)
    p[0, 0] = 1.0
    return p


def decommit(
    regs: CommitmentRegisters,
    S_old: Iterable[int],
    S_new: Iterable[int],
    oracle: haar.OracleHandle,
    rng: np.random.Generator | None = None,
) -> Decommitment:
    """Open the leaves ``S_new`` given that ``S_old`` is already open.

    With ``rng=None`` the run is exact: the state is projected on the
    all-zero branch and the failure probability accumulates in ``p_bot``.
    With a generator each syndrome is sampled and the first nonzero outcome
    aborts (``ok=False``).
    """
    lay = regs.layout
    S_old, S_new = set(S_old), set(S_new)
    for u in S_old | S_new:
        if not lay.is_leaf(u):
            raise ValueError(f"node {u} is not a leaf")
    needed = r_set_of(S_new | S_old, lay.ell)
    missing = sorted(u for u in needed if regs.owner.get(u) != "verifier")
    if missing:
        raise KeyError(f"registers {missing} have not been sent to the verifier")
    todo = sorted(u for u in p_set_of(S_new, lay.ell) - p_set_of(S_old, lay.ell) if u < lay.ell and u not in regs.uncomputed)
    b = lay.b
    proj0 = _zero_projector(b)
    zero_probs, p_pass, q0 = [], 1.0, oracle.queries
    for u in todo:
        regs.state = haar.query(oracle, regs.state, _oracle_targets(lay, u), inverse=True)
        regs.uncomputed.add(u)
        if rng is None:
            branch = qsim.measure_branches(regs.state, lay.regs(u), [proj0, np.eye(2**b) - proj0])
            p0, post = branch[0]
            zero_probs.append(p0)
            p_pass *= p0
            if post is None:
                return Decommitment(False, (), zero_probs, 1.0, oracle.queries - q0)
            regs.state = post
        else:
            k, post = qsim.measure(regs.state, lay.regs(u), qsim.computational_effects(b), rng)
            regs.state = post
            if k != 0:
                return Decommitment(False, (), zero_probs, 1.0, oracle.queries - q0)
    return Decommitment(True, tuple(sorted(S_new)), zero_probs, 1.0 - p_pass, oracle.queries - q0)
