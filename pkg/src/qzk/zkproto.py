"""The committed interactive protocol over a shared Haar oracle.

The prover commits to its witness in a Merkle tree and sends the root.  In
round i the verifier announces its previous outcomes, the prover sends the
registers needed to open the queried leaves, the verifier runs ``decommit``
and then applies the round's POVM to the opened witness qubits.

Bookkeeping: ``held`` is the set of registers already in the verifier's hands
(the root from the first message on) and ``opened`` the set of leaves already
opened.  A round sends R(W_i) minus ``held`` and opens W_i against ``opened``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import haar, merkle, qsim


@dataclass(frozen=True)
class SimVerifierSpec:
    """An adaptive local verifier.

    ``query_plan(tau)`` maps the outcomes so far to ``(S_i, effects)`` with
    S_i a tuple of witness qubits and ``effects`` a POVM on them (in S_i
    order).  ``decision(tau)`` is the final predicate.
    """

    N: int
    m_L: int
    ell_L: int
    k: int
    query_plan: Callable
    decision: Callable
    sigma: qsim.State | None = None

    def plan(self, tau: tuple):
        S, effects = self.query_plan(tuple(tau))
        S = tuple(int(q) for q in S)
        if len(S) > self.k:
            raise ValueError(f"round queries {len(S)} qubits, budget is {self.k}")
        if len(effects) > self.m_L:
            raise ValueError(f"POVM has {len(effects)} outcomes, alphabet is {self.m_L}")
        if any(not 0 <= q < self.N for q in S):
            raise ValueError("query outside the witness")
        return S, effects


@dataclass
class Message:
    direction: str  # "P->V" or "V->P"
    bits: int = 0
    registers: tuple = ()
    qubits: int = 0
    payload: tuple = ()


@dataclass
class Transcript:
    messages: list = field(default_factory=list)
    queries_prover: int = 0
    queries_verifier: int = 0
    note: str = ""

    @property
    def qubits_sent(self) -> int:
        return sum(m.qubits for m in self.messages)

    @property
    def bits_sent(self) -> int:
        return sum(m.bits for m in self.messages)

    def to_dict(self) -> dict:
        return {
            "messages": [
                {"direction": m.direction, "bits": m.bits, "registers": list(m.registers), "qubits": m.qubits, "payload": list(m.payload)}
                for m in self.messages
            ],
            "totals": {
                "qubits_sent": self.qubits_sent,
                "bits_sent": self.bits_sent,
                "oracle_queries_prover": self.queries_prover,
                "oracle_queries_verifier": self.queries_verifier,
            },
            "note": self.note,
        }


# ---------------------------------------------------------------------------
# provers


class HonestProver:
    """Commits to the witness and sends exactly the requested registers."""

    def commit(self, sigma: qsim.State, lam: int, oracle: haar.OracleHandle) -> merkle.CommitmentRegisters:
        return merkle.commit(sigma, sigma.num_qubits, lam, oracle)

    def respond(self, regs: merkle.CommitmentRegisters, round_: int, tau: tuple, requested: set) -> set:
        return set(requested)


class EmptyProver(HonestProver):
    """Ignores the witness and commits to |0...0>."""

    def commit(self, sigma, lam, oracle):
        return merkle.commit(qsim.PureState.zero(sigma.num_qubits), sigma.num_qubits, lam, oracle)


class TamperProver(HonestProver):
    """Applies X to one qubit of one of its registers right before a round's reply."""

    def __init__(self, node: int, qubit: int = 0, round_: int = 1):
        self.node, self.qubit, self.round = node, qubit, round_

    def respond(self, regs, round_, tau, requested):
        if round_ == self.round and regs.owner.get(self.node) == "prover":
            q = regs.layout.regs(self.node)[self.qubit]
            regs.state = qsim.apply_gate(regs.state, qsim.GateOp(qsim.X, (q,)))
        return set(requested)


# ---------------------------------------------------------------------------
# protocol runs


def _leaves(lay: merkle.TreeLayout, S: Sequence[int]) -> set:
    return {lay.leaf(q) for q in S}


def _bits_per_turn(spec: SimVerifierSpec) -> int:
    return max(1, math.ceil(math.log2(spec.m_L))) if spec.m_L > 1 else 0


def _setup(spec, sigma, oracle, prover):
    if not merkle._is_power_of_two(spec.N):
        raise ValueError("the witness length must be a power of 2")
    lam = oracle.lam
    q0 = oracle.queries
    regs = prover.commit(sigma, lam, oracle)
    queries_prover = oracle.queries - q0
    regs.transfer([1])
    tr = Transcript(queries_prover=queries_prover)
    tr.messages.append(Message("P->V", registers=(1,), qubits=regs.layout.b))
    return regs, tr


def _measure_positions(regs: merkle.CommitmentRegisters, S: Sequence[int]) -> list:
    lay = regs.layout
    return [lay.regs(lay.leaf(q))[0] for q in S]


def run_protocol_exact(spec: SimVerifierSpec, sigma: qsim.State, oracle: haar.OracleHandle, prover=None):
    """Exact acceptance probability by enumerating every verifier branch.

    Returns ``(probability, transcript)``; the transcript is the one of the
    branch with the largest communication (ties broken by branch order).
    Verifier query counts in it are those of that single branch.
    """
    prover = prover or HonestProver()
    regs, tr = _setup(spec, sigma, oracle, prover)

    results = []

    def recurse(regs, tr, tau, weight, held, opened):
        i = len(tau) + 1
        if i > spec.ell_L:
            results.append((weight * (1.0 if spec.decision(tuple(tau)) else 0.0), tr))
            return
        S, effects = spec.plan(tuple(tau))
        lay = regs.layout
        tr.messages.append(Message("V->P", bits=_bits_per_turn(spec), payload=tuple(tau)))
        W = _leaves(lay, S)
        requested = merkle.r_set_of(W, lay.ell) - held
        sent = prover.respond(regs, i, tuple(tau), requested)
        tr.messages.append(Message("P->V", registers=tuple(sorted(sent)), qubits=lay.b * len(sent)))
        if sent != requested:
            tr.note = "shape violation"
            results.append((0.0, tr))
            return
        regs.transfer(sent)
        held = held | sent
        q0 = oracle.queries
        dec = merkle.decommit(regs, opened, W, oracle)
        tr.queries_verifier += oracle.queries - q0
        if not dec.ok:
            results.append((0.0, tr))
            return
        weight *= 1.0 - dec.p_bot
        opened = opened | W
        branches = qsim.measure_branches(regs.state, _measure_positions(regs, S), effects)
        for z, (p, post) in enumerate(branches):
            if post is None:
                continue
            sub = merkle.CommitmentRegisters(lay, post, dict(regs.owner), set(regs.uncomputed))
            recurse(sub, copy.deepcopy(tr), tau + [z], weight * p, held, opened)

    recurse(regs, tr, [], 1.0, {1}, set())
    prob = float(sum(p for p, _ in results))
    worst = max(results, key=lambda r: r[1].qubits_sent)[1] if results else tr
    return prob, worst


def run_protocol_sampled(spec: SimVerifierSpec, sigma: qsim.State, oracle: haar.OracleHandle, rng: np.random.Generator, prover=None):
    """One sampled run; returns ``(accept, transcript)``."""
    prover = prover or HonestProver()
    regs, tr = _setup(spec, sigma, oracle, prover)
    lay = regs.layout
    held, opened, tau = {1}, set(), []
    for i in range(1, spec.ell_L + 1):
        S, effects = spec.plan(tuple(tau))
        tr.messages.append(Message("V->P", bits=_bits_per_turn(spec), payload=tuple(tau)))
        W = _leaves(lay, S)
        requested = merkle.r_set_of(W, lay.ell) - held
        sent = prover.respond(regs, i, tuple(tau), requested)
        tr.messages.append(Message("P->V", registers=tuple(sorted(sent)), qubits=lay.b * len(sent)))
        if sent != requested:
            tr.note = "shape violation"
            return False, tr
        regs.transfer(sent)
        held |= sent
        q0 = oracle.queries
        dec = merkle.decommit(regs, opened, W, oracle, rng)
        tr.queries_verifier += oracle.queries - q0
        if not dec.ok:
            tr.note = "decommit failed"
            return False, tr
        opened |= W
        z, regs.state = qsim.measure(regs.state, _measure_positions(regs, S), effects, rng)
        tau.append(z)
    return bool(spec.decision(tuple(tau))), tr


def direct_acceptance(spec: SimVerifierSpec, sigma: qsim.State) -> float:
    """Acceptance of the local verifier run directly on the witness."""

    def recurse(state, tau, weight):
        if len(tau) == spec.ell_L:
            return weight * (1.0 if spec.decision(tuple(tau)) else 0.0)
        S, effects = spec.plan(tuple(tau))
        total = 0.0
        for z, (p, post) in enumerate(qsim.measure_branches(state, S, effects)):
            if post is not None:
                total += recurse(post, tau + [z], weight * p)
        return total

    return float(recurse(sigma, [], 1.0))


def comm_cost(tr: Transcript, k: int, ell_L: int, ell: int, lam: int) -> dict:
    bound = lam * (1 + ell_L * k * 2 * (math.log2(ell) + 1))
    return {"qubits": tr.qubits_sent, "bits": tr.bits_sent, "bound": bound, "within_bound": tr.qubits_sent <= bound}


# ---------------------------------------------------------------------------
# fixtures


BELL = np.array(
    [[1, 0, 0, 1], [1, 0, 0, -1], [0, 1, 1, 0], [0, 1, -1, 0]],
    dtype=complex,
) / np.sqrt(2)


def bell_effects() -> list:
    """Projectors onto Phi+, Phi-, Psi+, Psi- (outcome 0 is Phi+)."""
    return [np.outer(v, v.conj()) for v in BELL]


def toy_bell_spec(pairs: int = 2) -> SimVerifierSpec:
    """Round i measures qubits (2i, 2i+1) in the Bell basis; accept iff all Phi+."""
    effects = bell_effects()
    sigma = qsim.PureState(2 * pairs, _kron_pow(BELL[0], pairs))
    return SimVerifierSpec(
        N=2 * pairs,
        m_L=4,
        ell_L=pairs,
        k=2,
        query_plan=lambda tau: ((2 * len(tau), 2 * len(tau) + 1), effects),
        decision=lambda tau: all(z == 0 for z in tau),
        sigma=sigma,
    )


def accept_all_spec(N: int, rounds: int = 1) -> SimVerifierSpec:
    effects = qsim.computational_effects(1)
    return SimVerifierSpec(
        N=N,
        m_L=2,
        ell_L=rounds,
        k=1,
        query_plan=lambda tau: ((len(tau) % N,), effects),
        decision=lambda tau: True,
    )


def _kron_pow(v: np.ndarray, r: int) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for _ in range(r):
        out = np.kron(out, v)
    return out
