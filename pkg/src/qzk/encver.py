"""The encoded verifier, its history Hamiltonian, and the local-view simulator.

State register order (all indices below are relative to the state register;
the clock sits in front of it in the full register)::

    Eotp (2Nn) | Edata (Nn) | Echk (3k(N-1)) | Eidx (N log m) | Emidx (N log m) | Emagic (gamma N) | Eanc (gamma N)

Eotp and Edata form the witness; everything from Echk on is ancilla.  The
program is a list of steps grouped into seven phases: magic-state set-up,
encoding, H on the index register, copy of the index, check encoding, the
encoded check test, decoding of the output block.  Steps of phases 5 and 6
depend on the check index i and are stored as indexed families; applied as a
whole they act as ``sum_i V_i (x) |Enc(i)><Enc(i)|_Eidx`` with the identity on
the complement of span{Enc(i)}.

At kappa = 0 (identity code) everything is numeric.  Higher kappa builds the
program and the term table only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from . import clockham, qsat, qsim, steane

REGISTERS = ("Eotp", "Edata", "Echk", "Eidx", "Emidx", "Emagic", "Eanc")
PARTITION = ("Eidx", "Emidx", "Eanc", "Emagic", "Echk")
PHASE_NAMES = ("magic", "enc", "hadamard", "copy", "check-encoding", "etest", "dec")
C_TEST = 4

_LOGICAL = {"CNOT": qsim.CNOT, "CZ": qsim.CZ, "H": qsim.H, "P": qsim.P, "T": qsim.T, "X": qsim.X}


# ---------------------------------------------------------------------------
# layout and program


@dataclass(frozen=True)
class Layout:
    n: int
    m: int
    k: int
    gamma: int
    N: int

    @property
    def logm(self) -> int:
        return int(math.log2(self.m))

    @property
    def sizes(self) -> dict:
        N, n = self.N, self.n
        return {
            "Eotp": 2 * N * n,
            "Edata": N * n,
            "Echk": 3 * self.k * (N - 1),
            "Eidx": N * self.logm,
            "Emidx": N * self.logm,
            "Emagic": self.gamma * N,
            "Eanc": self.gamma * N,
        }

    @cached_property
    def offsets(self) -> dict:
        out, pos = {}, 0
        for name in REGISTERS:
            out[name] = pos
            pos += self.sizes[name]
        return out

    @property
    def n_witness(self) -> int:
        return 3 * self.N * self.n

    @property
    def n_ancilla(self) -> int:
        return sum(self.sizes.values()) - self.n_witness

    @property
    def n_state(self) -> int:
        return sum(self.sizes.values())

    def register(self, name: str) -> tuple:
        off = self.offsets[name]
        return tuple(range(off, off + self.sizes[name]))

    def block(self, name: str, i: int) -> tuple:
        """Block i (0-based); Echk blocks hold N-1 qubits, all others N."""
        width = self.N - 1 if name == "Echk" else self.N
        count = self.sizes[name] // width if width else 3 * self.k
        if not 0 <= i < count:
            raise IndexError(f"{name} has no block {i}")
        off = self.offsets[name] + i * width
        return tuple(range(off, off + width))

    @property
    def output_qubit(self) -> int:
        return self.block("Eanc", 0)[0]

    def index_bits(self, i: int) -> tuple:
        return tuple((i >> (self.logm - 1 - b)) & 1 for b in range(self.logm))


@dataclass(frozen=True)
class Step:
    phase: int
    j: int
    gates: tuple = ()  # GateOps for an ordinary step
    family: tuple | None = None  # per-index tuples of GateOps for phases 5 and 6

    @property
    def indexed(self) -> bool:
        return self.family is not None

    def member_support(self, i: int) -> tuple:
        return tuple(sorted({q for g in self.family[i] for q in g.targets}))

    def support(self, layout: Layout) -> tuple:
        if self.indexed:
            qs = {q for fam in self.family for g in fam for q in g.targets}
            qs |= set(layout.register("Eidx"))
        else:
            qs = {q for g in self.gates for q in g.targets}
        return tuple(sorted(qs))


@dataclass(frozen=True)
class EncodedVerifierProgram:
    instance: qsat.QsatInstance
    params: steane.CodeParams
    layout: Layout
    steps: tuple
    phase_lengths: tuple
    c_test: int

    @property
    def T(self) -> int:
        return len(self.steps)

    def phase_end(self, phase: int) -> int:
        return sum(self.phase_lengths[:phase])

    def summary(self) -> dict:
        return {
            "instance": {"n": self.instance.n, "m": self.instance.m, "k": self.instance.k, "gamma": self.instance.gamma},
            "kappa": self.params.kappa,
            "c_test": self.c_test,
            "T": self.T,
            "registers": dict(self.layout.sizes),
            "phases": [
                {"phase": p + 1, "name": PHASE_NAMES[p], "length": self.phase_lengths[p], "indexed": p in (4, 5)}
                for p in range(7)
            ],
        }


def _map(g: qsim.GateOp, qubits: Sequence[int]) -> qsim.GateOp:
    return qsim.GateOp(g.matrix, tuple(qubits[q] for q in g.targets))


def _broadcast(seq_gates: list, blocks: list, length: int) -> list:
    """Step j applies seq_gates[j] to every block; identity-padded to ``length``."""
    steps = []
    for j in range(length):
        if j < len(seq_gates):
            steps.append(tuple(_map(seq_gates[j], b) for b in blocks))
        else:
            steps.append(())
    return steps


def _layer(name: str, block_groups: list, params: steane.CodeParams, magic=None) -> list:
    """Steps of one logical gate applied in parallel to several block groups."""
    if params.kappa == 0:
        return [tuple(qsim.GateOp(_LOGICAL[name], tuple(q for b in grp for q in b)) for grp in block_groups)]
    seq = steane.transversal_sequence(name, params)
    groups = [tuple(q for b in grp for q in b) for grp in block_groups]
    if name == "T":
        groups = [g + tuple(magic) for g in groups]
    return [tuple(_map(g, grp) for grp in groups) for g in seq.gates]


def _etest_steps(inst: qsat.QsatInstance, i: int, lay: Layout, params: steane.CodeParams) -> list:
    s = inst.subsets[i]
    n = lay.n
    steps = []
    steps += _layer("CNOT", [(lay.block("Eotp", u), lay.block("Edata", u)) for u in s], params)
    steps += _layer("CZ", [(lay.block("Eotp", u + n), lay.block("Edata", u)) for u in s], params)

    def wire(w):
        return lay.block("Edata", s[w]) if w < lay.k else lay.block("Eanc", w - lay.k)

    used_magic = 0
    for g in inst.circuits[i]:
        magic = None
        if g.name == "T" and params.kappa > 0:
            if used_magic >= lay.gamma:
                raise ValueError(f"check {i} has more T gates than magic blocks (gamma={lay.gamma})")
            magic = lay.block("Emagic", used_magic)
            used_magic += 1
        steps += _layer(g.name, [tuple(wire(w) for w in g.wires)], params, magic)
    return steps


def build_program(inst: qsat.QsatInstance, params: steane.CodeParams | None = None, c_test: int = C_TEST) -> EncodedVerifierProgram:
    """Sub-unitary decomposition of the encoded verifier.

    At kappa >= 1 a logical gate in the check test costs N transversal steps,
    so the phase-6 budget is ``c_test * gamma * N`` steps (``c_test * gamma``
    at kappa = 0).
    """
    params = params or steane.CodeParams(0)
    m = inst.m
    if m & (m - 1):
        raise ValueError(f"m={m} is not a power of 2; pad the instance first")
    inst = qsat.normalize(inst)
    lay = Layout(inst.n, m, inst.k, inst.gamma, params.N)
    N = params.N
    phases = []

    # 1. magic states on the leader qubit of each Emagic block
    leaders = [lay.block("Emagic", a)[0] for a in range(lay.gamma)]
    phases.append([tuple(qsim.GateOp(qsim.H, (q,)) for q in leaders), tuple(qsim.GateOp(qsim.T, (q,)) for q in leaders)])

    # 2. encode ancilla, magic and index blocks
    enc = steane.encoding_sequence(params).gates
    blocks = [lay.block("Eanc", a) for a in range(lay.gamma)] + [lay.block("Emagic", a) for a in range(lay.gamma)]
    blocks += [lay.block("Eidx", b) for b in range(lay.logm)] + [lay.block("Emidx", b) for b in range(lay.logm)]
    phases.append(_broadcast(enc, blocks, max(1, len(enc))))

    # 3. logical H on the index, 4. logical copy into Emidx
    h = steane.transversal_sequence("H", params).gates
    phases.append(_broadcast(h, [lay.block("Eidx", b) for b in range(lay.logm)], N))
    cx = steane.transversal_sequence("CNOT", params).gates
    pairs = [lay.block("Eidx", b) + lay.block("Emidx", b) for b in range(lay.logm)]
    phases.append(_broadcast(cx, pairs, N))

    # 5. syndrome extraction of data and pad blocks into Echk (indexed by i)
    chk = steane.syndrome_sequence(params).gates if N > 1 else []
    l_chk = max(1, len(chk))
    fam5 = []
    for tau in range(3 * lay.k):
        for j in range(l_chk):
            members = []
            for i in range(m):
                u = inst.subsets[i][tau % lay.k]
                src = (
                    lay.block("Edata", u)
                    if tau < lay.k
                    else lay.block("Eotp", u if tau < 2 * lay.k else u + lay.n)
                )
                if chk:
                    members.append((_map(chk[j], src + lay.block("Echk", tau)),))
                else:
                    members.append(())
            fam5.append(tuple(members))
    phases.append(fam5)

    # 6. undo the pad, run C_i; identity padded to the budget
    l_etest = c_test * lay.gamma * N
    per_check = [_etest_steps(inst, i, lay, params) for i in range(m)]
    worst = max(len(p) for p in per_check)
    if worst > l_etest:
        raise ValueError(f"check test needs {worst} steps but c_test*gamma allows {l_etest}; raise c_test")
    phases.append([tuple(per_check[i][j] if j < len(per_check[i]) else () for i in range(m)) for j in range(l_etest)])

    # 7. decode the output block
    dec = steane.decoding_sequence(params).gates
    phases.append(_broadcast(dec, [lay.block("Eanc", 0)], max(1, len(dec))))

    steps = []
    for p, phase in enumerate(phases, start=1):
        for j, body in enumerate(phase, start=1):
            if p in (5, 6):
                steps.append(Step(p, j, family=tuple(tuple(x) for x in body)))
            else:
                steps.append(Step(p, j, gates=tuple(body)))
    return EncodedVerifierProgram(inst, params, lay, tuple(steps), tuple(len(p) for p in phases), c_test)


# ---------------------------------------------------------------------------
# dense (kappa = 0) machinery


def _require_vanilla(prog: EncodedVerifierProgram) -> None:
    if prog.params.kappa != 0:
        raise qsim.CapacityError("numeric execution of the encoded pipeline is limited to kappa = 0")


def dense_product(gates: Sequence[qsim.GateOp], support: Sequence[int]) -> np.ndarray:
    """Product of ``gates`` (first gate applied first) as a matrix on ``support``."""
    support = list(support)
    ns = len(support)
    u = np.eye(2**ns, dtype=complex)
    for g in gates:
        pos = [support.index(q) for q in g.targets]
        u = qsim.apply_matrix(u.T, g.matrix, pos, ns).T
    return u


def dense_step(prog: EncodedVerifierProgram, step: Step) -> qsim.GateOp:
    supp = step.support(prog.layout)
    if not supp:
        return clockham.identity_step()
    if not step.indexed:
        return qsim.GateOp(dense_product(step.gates, supp), supp)
    lay = prog.layout
    idx = lay.register("Eidx")
    rest = [q for q in supp if q not in idx]
    d_rest = 2 ** len(rest)
    blocks = []
    for x in range(2 ** len(idx)):
        # at kappa = 0 every Eidx basis state is some |i>
        blocks.append(dense_product(step.family[x], rest) if x < lay.m else np.eye(d_rest, dtype=complex))
    u_local = np.zeros((2 ** len(idx) * d_rest,) * 2, dtype=complex)
    for x, b in enumerate(blocks):
        u_local[x * d_rest:(x + 1) * d_rest, x * d_rest:(x + 1) * d_rest] = b
    order = list(idx) + rest
    return qsim.GateOp(reorder(u_local, order, supp), supp)


def member_op(step: Step, i: int) -> qsim.GateOp:
    supp = step.member_support(i)
    if not supp:
        return clockham.identity_step()
    return qsim.GateOp(dense_product(step.family[i], supp), supp)


def reorder(mat: np.ndarray, order: Sequence[int], target: Sequence[int]) -> np.ndarray:
    """Re-express an operator on qubits ``order`` in the qubit order ``target``."""
    order, target = list(order), list(target)
    k = len(order)
    if k == 0 or order == target:
        return mat
    perm = [order.index(q) for q in target]
    tens = mat.reshape((2,) * (2 * k)).transpose(perm + [k + p for p in perm])
    return tens.reshape(2**k, 2**k)


def unitary_sequence(prog: EncodedVerifierProgram) -> clockham.UnitarySequence:
    _require_vanilla(prog)
    lay = prog.layout
    n1 = lay.n_witness
    partition = [[q - n1 for q in lay.register(r)] for r in PARTITION]
    return clockham.UnitarySequence([dense_step(prog, s) for s in prog.steps], n1, lay.n_ancilla, partition)


def accept_projector(prog: EncodedVerifierProgram) -> tuple[np.ndarray, tuple]:
    """Projector onto w1 = 1 (leader of Eanc block 1) and w2 = 0 on Echk."""
    lay = prog.layout
    targets = (lay.output_qubit,) + lay.register("Echk")
    d = 2 ** len(targets)
    proj = np.zeros((d, d), dtype=complex)
    proj[d // 2, d // 2] = 1.0
    return proj, targets


# ---------------------------------------------------------------------------
# witnesses


@dataclass(frozen=True)
class Ensemble:
    """A mixed state given as a finite list of (probability, PureState)."""

    members: tuple

    @property
    def num_qubits(self) -> int:
        return self.members[0][1].num_qubits

    def density(self) -> np.ndarray:
        return sum(p * s.density() for p, s in self.members)


def _pad_bits(x, n: int) -> tuple:
    if isinstance(x, str):
        bits = tuple(int(c) for c in x)
    else:
        bits = tuple(int(c) for c in x)
    if len(bits) != n or any(b not in (0, 1) for b in bits):
        raise ValueError(f"pad {x!r} is not an {n}-bit string")
    return bits


def otp_witness(phi: qsim.PureState, pad="uniform", params: steane.CodeParams | None = None):
    """Enc(|a, b> (x) X^a Z^b |phi>) on Eotp + Edata, or the uniform average."""
    params = params or steane.CodeParams(0)
    n = phi.num_qubits
    if pad == "uniform":
        members = []
        for a in itertools.product((0, 1), repeat=n):
            for b in itertools.product((0, 1), repeat=n):
                members.append((4.0**-n, otp_witness(phi, (a, b), params)))
        return Ensemble(tuple(members))
    a, b = (_pad_bits(x, n) for x in pad)
    v = phi.amplitudes
    for q in range(n):
        if b[q]:
            v = qsim.apply_matrix(v, qsim.Z, (q,), n)
        if a[q]:
            v = qsim.apply_matrix(v, qsim.X, (q,), n)
    keys = np.zeros(4**n, dtype=complex)
    keys[int("".join(map(str, a + b)) or "0", 2)] = 1.0
    logical = np.kron(keys, v)
    if params.kappa == 0:
        return qsim.PureState(3 * n, logical)
    return qsim.PureState(3 * n * params.N, steane.encode_vector(logical, 3 * n, params))


# ---------------------------------------------------------------------------
# running the verifier


def _final_vector(prog: EncodedVerifierProgram, seq: clockham.UnitarySequence, phi: np.ndarray) -> np.ndarray:
    anc = np.zeros(2**seq.n2, dtype=complex)
    anc[0] = 1.0
    psi = np.kron(phi, anc)
    for g in seq.steps:
        psi = qsim.apply_matrix(psi, g.matrix, g.targets, seq.n_state)
    return psi


def run_venc(prog: EncodedVerifierProgram, witness) -> float:
    """Exact probability that the verifier accepts (w1 = 1 and w2 = 0)."""
    _require_vanilla(prog)
    lay = prog.layout
    if lay.n_state > qsim.MAX_PURE_QUBITS:
        raise qsim.CapacityError(f"state register has {lay.n_state} qubits")
    seq = unitary_sequence(prog)
    proj, targets = accept_projector(prog)
    if isinstance(witness, qsim.PureState):
        members = [(1.0, witness.amplitudes)]
    elif isinstance(witness, Ensemble):
        members = [(p, s.amplitudes) for p, s in witness.members]
    elif isinstance(witness, qsim.MixedState):
        w, v = np.linalg.eigh(witness.matrix)
        members = [(float(p), v[:, c]) for c, p in enumerate(w) if p > 1e-14]
    else:
        raise TypeError("witness must be a PureState, MixedState or Ensemble")
    total = 0.0
    for p, vec in members:
        if vec.shape != (2**lay.n_witness,):
            raise ValueError("witness dimension mismatch")
        out = _final_vector(prog, seq, vec)
        total += p * qsim.expectation_vector(out, proj, targets, seq.n_state).real
    return float(total)


# ---------------------------------------------------------------------------
# the encoded Hamiltonian


@dataclass
class EncodedHamiltonian:
    program: EncodedVerifierProgram
    table: list  # one dict per term: kind, phase, j, indexed, support_size
    history: clockham.HistoryHamiltonian | None = None
    members: dict = field(default_factory=dict)  # term position -> [J_i for each i]

    @property
    def M(self) -> int:
        return len(self.table)

    @property
    def B(self) -> int:
        return len(PARTITION)

    @property
    def terms(self) -> list:
        if self.history is None:
            raise qsim.CapacityError("dense terms exist only at kappa = 0")
        return self.history.terms

    def summary(self) -> dict:
        hist = {}
        for row in self.table:
            hist[row["support_size"]] = hist.get(row["support_size"], 0) + 1
        kinds = {}
        for row in self.table:
            kinds[row["kind"]] = kinds.get(row["kind"], 0) + 1
        return {
            "M": self.M,
            "T": self.program.T,
            "B": self.B,
            "terms_by_kind": kinds,
            "indexed_terms": sum(r["indexed"] for r in self.table),
            "locality_histogram": {str(k): v for k, v in sorted(hist.items())},
        }


def _clock_support(t: int, T: int) -> int:
    return 1 if T == 1 else (2 if t in (1, T) else 3)


def term_table(prog: EncodedVerifierProgram) -> list:
    T, lay = prog.T, prog.layout
    rows = []
    for t, s in enumerate(prog.steps, start=1):
        size = _clock_support(t, T) + len(s.support(lay))
        rows.append({"kind": "prop", "index": t, "phase": s.phase, "j": s.j, "indexed": s.indexed, "support_size": size})
    for t in range(1, T):
        rows.append({"kind": "stab", "index": t, "phase": None, "j": None, "indexed": False, "support_size": 2})
    for b, name in enumerate(PARTITION, start=1):
        rows.append({"kind": "in", "index": b, "phase": None, "j": None, "indexed": False, "support_size": 1 + lay.sizes[name]})
    out_size = 1 + 1 + lay.sizes["Echk"]
    rows.append({"kind": "out", "index": 1, "phase": None, "j": None, "indexed": False, "support_size": out_size})
    rows.append({"kind": "check", "index": 1, "phase": None, "j": None, "indexed": False, "support_size": 0})
    return rows


def build_encoded_hamiltonian(prog: EncodedVerifierProgram) -> EncodedHamiltonian:
    """H^enc = H^prop + H^in + H^stab + H^out, plus an identically zero check slot.

    The zero slot keeps the term count at 2T + B + 1; the verifier always
    accepts when it draws it.
    """
    table = term_table(prog)
    if prog.params.kappa != 0:
        return EncodedHamiltonian(prog, table)
    seq = unitary_sequence(prog)
    T = seq.T
    base = clockham.build_history_hamiltonian(seq)
    for term in base.terms:
        if term.kind == "prop":
            st = prog.steps[term.index - 1]
            term.info.update(phase=st.phase, j=st.j, indexed=st.indexed)
    reject_acc, targets = accept_projector(prog)
    reject = np.eye(reject_acc.shape[0], dtype=complex) - reject_acc
    terms = base.terms + [clockham.out_term(reject, targets, T), clockham.Term("check", 1, [], {})]
    H = clockham.HistoryHamiltonian(T, seq.n1, seq.n2, terms)
    members = {}
    for pos, term in enumerate(terms):
        if term.kind == "prop" and term.info.get("indexed"):
            st = prog.steps[term.index - 1]
            fam = []
            for i in range(prog.layout.m):
                op = member_op(st, i)
                fam.append(clockham.Term("prop", term.index, clockham.prop_pieces(term.index, T, op.matrix, op.targets), {"i": i}))
            members[pos] = fam
    return EncodedHamiltonian(prog, table, H, members)


# ---------------------------------------------------------------------------
# the two-round verifier


def _global(H: EncodedHamiltonian, state_qubits) -> tuple:
    T = H.program.T
    return tuple(T + q for q in state_qubits)


def _term_effect(term: clockham.Term):
    proj = term.local_matrix()
    proj = 0.5 * (proj + proj.conj().T)
    return proj, np.eye(proj.shape[0], dtype=complex) - proj


def _reduced(psi: np.ndarray, keep: Sequence[int], n: int) -> qsim.MixedState:
    return qsim.MixedState(len(keep), qsim.reduced_from_vector(psi, keep, n))


def rejection_probability(H: EncodedHamiltonian, witness, per_term: bool = False):
    """Exact rejection probability of ``venc_h_verify`` by branch enumeration.

    Every term is drawn with probability 1/M.  For an indexed term the
    Eidx outcome i and then the {J_i, I - J_i} outcome are enumerated on the
    reduced state of supp(J_i) + Eidx; both measurements act inside that set,
    so its marginal fixes every branch probability.
    """
    psi = clockham._vector(witness)
    hist = H.history
    if hist is None:
        raise qsim.CapacityError("branch calculus needs kappa = 0")
    n = hist.num_qubits
    lay = H.program.layout
    eidx = _global(H, lay.register("Eidx"))
    contrib = []
    for pos, term in enumerate(hist.terms):
        if term.kind == "check" or not term.pieces:
            contrib.append(0.0)
            continue
        if pos not in H.members:
            keep = term.support(hist.T)
            rho = _reduced(psi, keep, n)
            rej, acc = _term_effect(term)
            contrib.append(qsim.measure_branches(rho, range(len(keep)), [rej, acc])[0][0])
            continue
        total = 0.0
        for i, mem in enumerate(H.members[pos]):
            msupp = mem.support(hist.T)
            keep = tuple(sorted(set(msupp) | set(eidx)))
            rho = _reduced(psi, keep, n)
            branches = qsim.measure_branches(rho, [keep.index(q) for q in eidx], qsim.computational_effects(len(eidx)))
            p_i, post = branches[i]
            if post is None:
                continue
            rej, acc = _term_effect(mem)
            q = qsim.measure_branches(post, [keep.index(x) for x in msupp], [rej, acc])[0][0]
            total += p_i * q
        contrib.append(total)
    contrib = [c / H.M for c in contrib]
    return (float(sum(contrib)), contrib) if per_term else float(sum(contrib))


def venc_h_verify(H: EncodedHamiltonian, witness, rng: np.random.Generator):
    """One run of the two-round verifier; returns (accept, transcript)."""
    psi = clockham._vector(witness)
    hist = H.history
    if hist is None:
        raise qsim.CapacityError("the verifier runs numerically only at kappa = 0")
    n = hist.num_qubits
    lay = H.program.layout
    pos = int(rng.integers(H.M))
    term = hist.terms[pos]
    transcript = {"term": pos, "kind": term.kind, "phase": term.info.get("phase"), "index": None, "round1": [], "round2": []}
    if term.kind == "check" or not term.pieces:
        transcript["outcome"] = "accept"
        return True, transcript
    if pos not in H.members:
        keep = term.support(hist.T)
        rej, acc = _term_effect(term)
        k, _ = qsim.measure(_reduced(psi, keep, n), range(len(keep)), [rej, acc], rng)
        transcript["round1"] = list(keep)
    else:
        eidx = _global(H, lay.register("Eidx"))
        marg = np.real(np.diag(qsim.reduced_from_vector(psi, eidx, n))) if eidx else np.ones(1)
        i = int(rng.choice(len(marg), p=marg / marg.sum()))
        transcript["index"] = i
        transcript["round1"] = list(eidx)
        mem = H.members[pos][i]
        msupp = mem.support(hist.T)
        transcript["round2"] = list(msupp)
        keep = tuple(sorted(set(msupp) | set(eidx)))
        rho = qsim.reduced_from_vector(psi, keep, n)
        proj = qsim.embed_rho(qsim.computational_effects(len(eidx))[i], [keep.index(q) for q in eidx], len(keep))
        rho = proj @ rho @ proj
        rho = qsim.MixedState(len(keep), rho / np.trace(rho).real)
        rej, acc = _term_effect(mem)
        k, _ = qsim.measure(rho, [keep.index(x) for x in msupp], [rej, acc], rng)
    transcript["outcome"] = "reject" if k == 0 else "accept"
    return k != 0, transcript


# ---------------------------------------------------------------------------
# local view simulator


@dataclass(frozen=True)
class TermView:
    matrix: qsim.MixedState
    support: tuple  # global qubit indices
    case: int
    alpha: float


class _ViewSimulator:
    """Reduced history-state marginals computed from the witness marginal only.

    The witness enters only through ``witness_marginal``: the pad-averaged
    honest witness on a set of Eotp/Edata qubits.  At kappa = 0 the identity
    code hides nothing, so that marginal is produced from the canonical
    maximiser of the instance, which is the honest prover's witness.
    """

    def __init__(self, prog: EncodedVerifierProgram):
        _require_vanilla(prog)
        self.prog = prog
        lay = self.lay = prog.layout
        inst = prog.instance
        self.n1 = lay.n_witness
        self.t4 = prog.phase_end(4)
        self.t6 = prog.phase_end(6)
        self.steps = [dense_step(prog, s) for s in prog.steps]
        phi = qsat.canonical_maximizer(inst)
        a = qsat.averaged_operator(inst)
        self.val = float(np.vdot(phi, a @ phi).real)
        self.alpha = max(0.0, 1.0 - self.val)
        ens = otp_witness(qsim.PureState(inst.n, phi), "uniform")
        self.rho_w = ens.density()
        # ancilla trajectory through phases 1-4 (they never touch the witness)
        n2 = lay.n_ancilla
        a_t = np.zeros(2**n2, dtype=complex)
        a_t[0] = 1.0
        self.anc = [a_t]
        for g in self.steps[: self.t4]:
            a_t = qsim.apply_matrix(a_t, g.matrix, tuple(q - self.n1 for q in g.targets), n2)
            self.anc.append(a_t)
        self.W = set(range(self.n1))
        self.X = set(lay.register("Eidx")) | set(lay.register("Emidx"))
        self.E1 = set(lay.block("Eanc", 0))
        self.members = {t: [member_op(prog.steps[t - 1], i) for i in range(lay.m)] for t in range(self.t4 + 1, self.t6 + 1)}
        self.approx_used = False

    def witness_marginal(self, q: Sequence[int]) -> np.ndarray:
        return qsim.reduced_from_rho(self.rho_w, list(q), self.n1)

    def _ancilla_marginal(self, t: int, q: Sequence[int]) -> np.ndarray:
        return qsim.reduced_from_vector(self.anc[t], [x - self.n1 for x in q], self.lay.n_ancilla)

    def _bits(self, i: int, qubits: Sequence[int]) -> tuple:
        lay = self.lay
        bits = lay.index_bits(i)
        idx, midx = lay.register("Eidx"), lay.register("Emidx")
        return tuple(bits[idx.index(q)] if q in idx else bits[midx.index(q)] for q in qubits)

    def marginal(self, t: int, Q: Sequence[int]) -> np.ndarray:
        Q = sorted(Q)
        if t <= self.t4:
            qw = [q for q in Q if q in self.W]
            qa = [q for q in Q if q not in self.W]
            return np.kron(self.witness_marginal(qw), self._ancilla_marginal(t, qa))
        if t <= self.t6:
            return self._coherent(t, Q)
        # decoding phase: output block taken as Enc(|1><1|) decoded, rest frozen at t6
        q1 = [q for q in Q if q in self.E1]
        qr = [q for q in Q if q not in self.E1]
        if q1:
            self.approx_used = True
        base = self._coherent(self.t6, qr)
        one = np.zeros((2, 2), dtype=complex)
        one[1, 1] = 1.0
        part = one if q1 else np.ones((1, 1), dtype=complex)
        return reorder(np.kron(base, part), qr + q1, Q)

    def _coherent(self, t: int, Q: Sequence[int]) -> np.ndarray:
        lay = self.lay
        qx = [q for q in Q if q in self.X]
        qo = [q for q in Q if q not in self.X]
        traced = sorted(self.X - set(qx))
        gates = {i: [self.members[s][i] for s in range(self.t4 + 1, t + 1)] for i in range(lay.m)}
        out = np.zeros((2 ** len(Q),) * 2, dtype=complex)
        for i, j in itertools.product(range(lay.m), repeat=2):
            if self._bits(i, traced) != self._bits(j, traced):
                continue
            L = sorted(set(qo) | {q for g in gates[i] + gates[j] for q in g.targets})
            lw = [q for q in L if q in self.W]
            la = [q for q in L if q not in self.W]
            # other ancillas are a product with the index part, so their t4 marginal is exact here
            rho = np.kron(self.witness_marginal(lw), self._ancilla_marginal(self.t4, la))
            ui = dense_product(gates[i], L)
            uj = dense_product(gates[j], L)
            x = ui @ rho @ uj.conj().T
            x = _partial(x, L, qo)
            ket = np.zeros(2 ** len(qx))
            bra = np.zeros(2 ** len(qx))
            ket[int("".join(map(str, self._bits(i, qx))) or "0", 2)] = 1.0
            bra[int("".join(map(str, self._bits(j, qx))) or "0", 2)] = 1.0
            out += reorder(np.kron(x, np.outer(ket, bra)), qo + qx, Q) / lay.m
        return out

    def cross(self, a: int, b: int, Q: Sequence[int]) -> np.ndarray:
        """Tr_rest |phi_a><phi_b| restricted to Q, for a < b."""
        Q = sorted(Q)
        window = self.steps[a:b]
        L = sorted(set(Q) | {q for g in window for q in g.targets})
        rho = self.marginal(a, L)
        u = dense_product(window, L)
        return _partial(rho @ u.conj().T, L, Q)


def _partial(x: np.ndarray, order: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    order = list(order)
    pos = [order.index(q) for q in keep]
    return qsim.reduced_from_rho(x, pos, len(order))


def _home_case(prog: EncodedVerifierProgram, term: clockham.Term) -> int:
    if term.kind == "out":
        return 4
    if term.kind != "prop":
        return 1
    t = term.index
    if t <= prog.phase_end(4):
        return 1
    if t <= prog.phase_end(5):
        return 2
    if t <= prog.phase_end(6):
        return 3
    return 4


def simulate_term_view(H: EncodedHamiltonian, term, sim: _ViewSimulator | None = None) -> TermView:
    """Honest history-state marginal on a term's support, built without the witness.

    ``term`` is a term position, or ``(position, i)`` for the view of an
    indexed term after the Eidx outcome i, on supp(J_i) + Eidx.
    """
    prog = H.program
    if prog.params.kappa != 0:
        raise qsim.CapacityError("the view simulator runs numerically only at kappa = 0")
    sim = sim or _ViewSimulator(prog)
    sim.approx_used = False
    T = prog.T
    if isinstance(term, tuple):
        pos, i = term
        if pos not in H.members:
            raise ValueError(f"term {pos} is not indexed")
        base = H.members[pos][i]
        sc = base.clock_support
        qs = sorted(set(base.state_support) | set(prog.layout.register("Eidx")))
        home = H.history.terms[pos]
    else:
        home = H.history.terms[term]
        sc, qs = home.clock_support, list(home.state_support)
    sc = list(sc)
    dc = 2 ** len(sc)
    out = np.zeros((dc * 2 ** len(qs),) * 2, dtype=complex)

    def clock_bits(t):
        return int("".join("1" if p < t else "0" for p in sc) or "0", 2)

    for t in range(T + 1):
        for t2 in range(t, T + 1):
            if any(p not in sc for p in range(t, t2)):
                break
            x = sim.marginal(t, qs) if t == t2 else sim.cross(t, t2, qs)
            e = np.zeros((dc, dc), dtype=complex)
            e[clock_bits(t), clock_bits(t2)] = 1.0
            block = np.kron(e, x) / (T + 1)
            out += block if t == t2 else block + block.conj().T
    supp = tuple(sc) + tuple(T + q for q in qs)
    # a view that needed the decode-phase approximation is reported as case 4
    case = 4 if sim.approx_used else _home_case(prog, home)
    alpha = sim.alpha if sim.approx_used else 0.0
    return TermView(qsim.MixedState(len(supp), out), supp, case, alpha)


def honest_view_oracle(H: EncodedHamiltonian, support: Sequence[int]) -> np.ndarray:
    """Pad average of partial traces of full honest history states (test oracle)."""
    prog = H.program
    seq = unitary_sequence(prog)
    phi = qsat.canonical_maximizer(prog.instance)
    ens = otp_witness(qsim.PureState(prog.instance.n, phi), "uniform")
    acc = 0
    for p, w in ens.members:
        hs = clockham.history_state(seq, w)
        acc = acc + p * qsim.reduced_from_vector(hs.amplitudes, list(support), hs.num_qubits)
    return acc


# ---------------------------------------------------------------------------
# the reduction


@dataclass
class SimQmaVerifier:
    hamiltonian: EncodedHamiltonian
    val: float
    lambda_min: float | None
    rounds: int = 2

    @property
    def M(self) -> int:
        return self.hamiltonian.M

    @property
    def completeness(self) -> float:
        """Acceptance guaranteed for the honest history state: 1 - (1 - val)/M."""
        return 1.0 - (1.0 - self.val) / self.M

    @property
    def soundness(self) -> float | None:
        """No state is accepted with probability above 1 - lambda_min/M."""
        return None if self.lambda_min is None else 1.0 - self.lambda_min / self.M

    @property
    def measured_c(self) -> float | None:
        if self.lambda_min is None or self.lambda_min <= 1e-12 or self.val >= 1.0 - 1e-12:
            return None
        return (1.0 - self.val) / math.sqrt(self.lambda_min)

    def run(self, witness, rng: np.random.Generator):
        return venc_h_verify(self.hamiltonian, witness, rng)

    def summary(self) -> dict:
        return {
            "M": self.M,
            "rounds": self.rounds,
            "val": self.val,
            "lambda_min": self.lambda_min,
            "completeness": self.completeness,
            "soundness": self.soundness,
            "measured_C": self.measured_c,
        }


def reduce_localqma(inst: qsat.QsatInstance, params: steane.CodeParams | None = None, c_test: int = C_TEST, solve: bool = True):
    """Pad to a power of two, build H^enc and wrap the two-round verifier."""
    params = params or steane.CodeParams(0)
    padded = qsat.pad_to_power_of_two(inst)
    prog = build_program(padded, params, c_test)
    H = build_encoded_hamiltonian(prog)
    val = qsat.val_max(padded)[0] if padded.n <= 12 else None
    lam = None
    if solve and H.history is not None:
        lam = clockham.min_eigenvalue(H.history, tol=1e-10)[0]
    return H, SimQmaVerifier(H, val, lam)


def fit_term_count(rows: Sequence[tuple]) -> tuple:
    """Fit M = a k + b gamma + c over (k, gamma, M) rows.

    Least squares, then rounding to integers; the residual is the exact
    integer misfit of the rounded constants (0 when the law holds).
    """
    A = np.array([[k, g, 1.0] for k, g, _ in rows])
    y = np.array([M for _, _, M in rows], dtype=float)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    a, b, c = (int(round(x)) for x in coef)
    resid = max(abs(a * k + b * g + c - M) for k, g, M in rows)
    return (a, b, c), resid
