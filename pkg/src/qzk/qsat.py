"""(k, gamma)-QSAT instances, their values, and power-of-two padding.

A check circuit acts on ``k`` data wires (indices ``0..k-1``) followed by
``gamma`` ancilla wires (indices ``k..k+gamma-1``).  Wire ``k`` (the first
ancilla) is the output.  Ancillas start in |0>.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import qsim

# Clifford+T plus X.  X = H P P H is Clifford (and transversal for the Steane
# code); accepting it natively keeps the always-accept check to a single gate.
GATE_SET = {
    "CNOT": (qsim.CNOT, 2),
    "P": (qsim.P, 1),
    "H": (qsim.H, 1),
    "T": (qsim.T, 1),
    "X": (qsim.X, 1),
}


@dataclass(frozen=True)
class Gate:
    name: str
    wires: tuple

    @property
    def matrix(self) -> np.ndarray:
        return GATE_SET[self.name][0]


def _normalize_gates(raw) -> tuple:
    gates = []
    for g in raw:
        if isinstance(g, Gate):
            name, wires = g.name, g.wires
        elif isinstance(g, dict):
            name, wires = g["gate"], g["wires"]
        else:
            name, wires = g
        wires = tuple(int(w) for w in wires)
        if name not in GATE_SET:
            raise ValueError(f"gate {name!r} is not in {{CNOT, P, H, T, X}}")
        if len(wires) != GATE_SET[name][1] or len(set(wires)) != len(wires):
            raise ValueError(f"gate {name} has malformed wires {wires}")
        gates.append(Gate(name, wires))
    return tuple(gates)


@dataclass(frozen=True)
class QsatInstance:
    n: int
    k: int
    gamma: int
    subsets: tuple
    circuits: tuple
    m: int = field(init=False)

    def __post_init__(self):
        subsets = tuple(tuple(int(q) for q in s) for s in self.subsets)
        circuits = tuple(_normalize_gates(c) for c in self.circuits)
        if len(subsets) != len(circuits):
            raise ValueError("need one circuit per subset")
        if not subsets:
            raise ValueError("an instance needs at least one check")
        if self.gamma < 1:
            raise ValueError("gamma >= 1 is required for the output wire")
        for s, c in zip(subsets, circuits):
            if len(set(s)) != len(s) or any(not 0 <= q < self.n for q in s):
                raise ValueError(f"bad subset {s}")
            if len(s) > self.k:
                raise ValueError(f"subset {s} larger than k={self.k}")
            width = len(s) + self.gamma
            for g in c:
                if any(not 0 <= w < width for w in g.wires):
                    raise ValueError(f"gate {g} exceeds the ancilla budget (wires < {width})")
        object.__setattr__(self, "subsets", subsets)
        object.__setattr__(self, "circuits", circuits)
        object.__setattr__(self, "m", len(subsets))

    # -- io
    @classmethod
    def from_dict(cls, d: dict) -> "QsatInstance":
        inst = cls(d["n"], d["k"], d["gamma"], d["subsets"], d["circuits"])
        if "m" in d and d["m"] != inst.m:
            raise ValueError("m does not match the number of checks")
        return inst

    @classmethod
    def from_json(cls, path) -> "QsatInstance":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "gamma": self.gamma,
            "subsets": [list(s) for s in self.subsets],
            "circuits": [[{"gate": g.name, "wires": list(g.wires)} for g in c] for c in self.circuits],
        }


def normalize(inst: QsatInstance) -> QsatInstance:
    """Pad every subset to exactly k qubits.

    A short subset is extended with the lowest-index unused qubits; the
    circuit's ancilla wires are shifted so the new data wires sit idle.
    """
    subsets, circuits = [], []
    for s, c in zip(inst.subsets, inst.circuits):
        short = inst.k - len(s)
        if short == 0:
            subsets.append(s)
            circuits.append(c)
            continue
        extra = [q for q in range(inst.n) if q not in s][:short]
        if len(extra) < short:
            raise ValueError("n < k: cannot normalise subsets")
        shift = lambda w: w if w < len(s) else w + short  # noqa: E731
        subsets.append(tuple(s) + tuple(extra))
        circuits.append(tuple(Gate(g.name, tuple(shift(w) for w in g.wires)) for g in c))
    return QsatInstance(inst.n, inst.k, inst.gamma, subsets, circuits)


def circuit_unitary(circuit: Sequence[Gate], width: int) -> np.ndarray:
    u = np.eye(2**width, dtype=complex)
    for g in circuit:
        u = qsim.apply_matrix(u.T, g.matrix, g.wires, width).T
    return u


def accept_effect(circuit: Sequence[Gate], k: int, gamma: int) -> np.ndarray:
    """POVM effect M with Tr[M sigma] = Pr[circuit outputs 1 on sigma]."""
    circuit = _normalize_gates(circuit)
    width = k + gamma
    for g in circuit:
        if any(not 0 <= w < width for w in g.wires):
            raise ValueError(f"gate {g} exceeds the ancilla budget")
    u = circuit_unitary(circuit, width)
    # columns of u with ancillas in |0>: indices x * 2^gamma
    iso = u[:, :: 2**gamma]
    out_proj = np.zeros(2**width)
    out_proj[((np.arange(2**width) >> (gamma - 1)) & 1) == 1] = 1.0
    m = iso.conj().T @ (out_proj[:, None] * iso)
    return 0.5 * (m + m.conj().T)


def effects(inst: QsatInstance) -> list[np.ndarray]:
    inst = normalize(inst)
    return [accept_effect(c, inst.k, inst.gamma) for c in inst.circuits]


def val_of_state(inst: QsatInstance, sigma: qsim.State) -> float:
    if sigma.num_qubits != inst.n:
        raise ValueError(f"state has {sigma.num_qubits} qubits, instance has n={inst.n}")
    inst = normalize(inst)
    total = sum(qsim.expectation(sigma, m_i, s) for m_i, s in zip(effects(inst), inst.subsets))
    return float(total / inst.m)


def _apply_average(inst: QsatInstance, mats, psi: np.ndarray) -> np.ndarray:
    out = np.zeros_like(psi)
    for m_i, s in zip(mats, inst.subsets):
        out += qsim.apply_matrix(psi, m_i, s, inst.n)
    return out / inst.m


def val_max(inst: QsatInstance, tol: float = 1e-10) -> tuple[float, qsim.PureState]:
    """Largest eigenvalue of the averaged acceptance operator and its eigenvector."""
    from .clockham import lanczos_min

    if inst.n > 12:
        raise qsim.CapacityError("val_max supports n <= 12")
    inst = normalize(inst)
    mats = effects(inst)
    lam, vec = lanczos_min(lambda v: -_apply_average(inst, mats, v), 2**inst.n, tol=tol, seed=0)
    return float(-lam), qsim.PureState(inst.n, vec)


def averaged_operator(inst: QsatInstance) -> np.ndarray:
    """Dense A = (1/m) sum_i M_i (x) I; only for small n."""
    inst = normalize(inst)
    mats = effects(inst)
    d = 2**inst.n
    return _apply_average(inst, mats, np.eye(d, dtype=complex)).T


def canonical_maximizer(inst: QsatInstance) -> np.ndarray:
    """Deterministic top eigenvector of A with its largest entry made real positive."""
    a = averaged_operator(inst)
    w, v = np.linalg.eigh(0.5 * (a + a.conj().T))
    vec = v[:, -1]
    j = int(np.argmax(np.abs(vec) > np.abs(vec).max() - 1e-9))
    return vec * (abs(vec[j]) / vec[j])


def always_accept_circuit(k: int) -> tuple:
    """X on the output wire."""
    return (Gate("X", (k,)),)


def pad_to_power_of_two(inst: QsatInstance) -> QsatInstance:
    m = inst.m
    m2 = 1 << max(0, math.ceil(math.log2(m)))
    if m2 == m:
        return inst
    inst = normalize(inst)
    dummy_subset = tuple(range(inst.k))
    subsets = inst.subsets + (dummy_subset,) * (m2 - m)
    circuits = inst.circuits + (always_accept_circuit(inst.k),) * (m2 - m)
    return replace(inst, subsets=subsets, circuits=circuits)


def padded_value(m: int, val: float) -> float:
    m2 = 1 << max(0, math.ceil(math.log2(m)))
    return (m2 - m) / m2 + (m / m2) * val
