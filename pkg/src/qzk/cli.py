"""Scenario runner: ``qzk --scenario NAME [--config FILE] [--seed S] [--out PATH] [--trials N]``.

Every scenario returns metrics plus named checks; the process exits with
status 1 if any check fails and 2 on an invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import clockham, encver, haar, merkle, qsat, qsim, steane, zkproto

SCHEMA = "qzk-report/1"


@dataclass
class ScenarioConfig:
    scenario: str
    seed: int = 0
    trials: int | None = None
    params: dict = field(default_factory=dict)
    instance: str | None = None


class ConfigError(ValueError):
    pass


def _check(name: str, ok: bool, value=None, tol=None) -> dict:
    return {"name": name, "pass": bool(ok), "value": value, "tolerance": tol}


def _power_of_two(name: str, x: int) -> None:
    if x < 1 or x & (x - 1):
        raise ConfigError(f"{name}={x} is not a power of 2")


def _instance(cfg: ScenarioConfig, default: dict) -> qsat.QsatInstance:
    if cfg.instance:
        return qsat.QsatInstance.from_json(cfg.instance)
    return qsat.QsatInstance.from_dict(cfg.params.get("instance", default))


ALL_ACCEPT = {"n": 1, "k": 1, "gamma": 1, "subsets": [[0], [0]], "circuits": [[["X", [1]]], [["X", [1]]]]}


# ---------------------------------------------------------------------------
# scenarios


def merkle_roundtrip(cfg: ScenarioConfig) -> tuple[dict, list]:
    ell = int(cfg.params.get("ell", 4))
    b = int(cfg.params.get("b", 1))
    _power_of_two("ell", ell)
    trials = cfg.trials or 50
    rng = np.random.default_rng(cfg.seed)
    worst_td, worst_zero = 0.0, 0.0
    for _ in range(trials):
        sigma = qsim.random_pure(ell, rng)
        G = haar.sample_haar(3 * b, int(rng.integers(2**31)))
        regs = merkle.commit(sigma, ell, 3 * b, G)
        regs.transfer(range(1, 2 * ell))
        dec = merkle.decommit(regs, set(), set(range(ell, 2 * ell)), G)
        worst_td = max(worst_td, qsim.trace_distance(regs.leaf_state(range(ell, 2 * ell)), sigma.to_mixed()))
        worst_zero = max([worst_zero] + [abs(1 - p) for p in dec.zero_probs])
    metrics = {"ell": ell, "b": b, "trials": trials, "max_trace_distance": worst_td, "max_zero_outcome_deviation": worst_zero}
    checks = [_check("round trip", worst_td <= 1e-9, worst_td, 1e-9), _check("syndromes zero", worst_zero <= 1e-9, worst_zero, 1e-9)]
    return metrics, checks


def protocol_completeness(cfg: ScenarioConfig):
    b = int(cfg.params.get("b", 1))
    trials = cfg.trials or 10
    spec = zkproto.toy_bell_spec()
    rng = np.random.default_rng(cfg.seed)
    direct = zkproto.direct_acceptance(spec, spec.sigma)
    gaps, probs = [], []
    for _ in range(trials):
        G = haar.sample_haar(3 * b, int(rng.integers(2**31)))
        p, _tr = zkproto.run_protocol_exact(spec, spec.sigma, G)
        probs.append(p)
        gaps.append(abs(p - direct))
    metrics = {"b": b, "trials": trials, "direct": direct, "protocol": probs, "max_gap": max(gaps)}
    checks = [_check("protocol equals direct", max(gaps) <= 1e-9, max(gaps), 1e-9), _check("honest accepts", abs(direct - 1) <= 1e-9, direct, 1e-9)]
    return metrics, checks


def _random_sequence(rng, T, n1, n2):
    ns = n1 + n2
    steps = []
    for _ in range(T):
        width = int(rng.integers(1, min(2, ns) + 1))
        targets = tuple(int(q) for q in rng.choice(ns, size=width, replace=False))
        steps.append(qsim.GateOp(haar.haar_matrix(2**width, rng), targets))
    return clockham.UnitarySequence(steps, n1, n2, [list(range(n2))] if n2 else [])


def history_energy(cfg: ScenarioConfig):
    trials = cfg.trials or 20
    rng = np.random.default_rng(cfg.seed)
    worst_e, worst_d = 0.0, 0.0
    for _ in range(trials):
        T = int(rng.integers(2, 7))
        n1 = int(rng.integers(1, 4))
        n2 = int(rng.integers(0, 7 - n1))
        seq = _random_sequence(rng, T, n1, n2)
        H = clockham.build_history_hamiltonian(seq)
        hs = clockham.history_state(seq, qsim.random_pure(n1, rng))
        worst_e = max(worst_e, abs(clockham.energy(H, hs)))
        worst_d = max(worst_d, clockham.history_subspace_distance(seq, hs))
    inst = _instance(cfg, ALL_ACCEPT)
    _eh, ver = encver.reduce_localqma(inst)
    lam, val = ver.lambda_min, ver.val
    metrics = {"trials": trials, "max_history_energy": worst_e, "max_subspace_distance": worst_d, "lambda_min": lam, "val": val, "M": ver.M}
    checks = [
        _check("history energy", worst_e <= 1e-10, worst_e, 1e-10),
        _check("history subspace", worst_d <= 1e-8, worst_d, 1e-8),
        _check("lambda_min <= 1 - val", lam <= 1 - val + 1e-8, lam, 1e-8),
    ]
    return metrics, checks


def venc_vanilla(cfg: ScenarioConfig):
    trials = cfg.trials or 5
    inst = _instance(cfg, ALL_ACCEPT)
    H, ver = encver.reduce_localqma(inst)
    prog = H.program
    rng = np.random.default_rng(cfg.seed)
    gaps = []
    for _ in range(trials):
        psi = qsim.random_pure(H.history.num_qubits, rng)
        gaps.append(abs(encver.rejection_probability(H, psi) - clockham.energy(H.history, psi) / H.M))
    metrics = {"T": prog.T, "M": H.M, "program": prog.summary(), "hamiltonian": H.summary(), "verifier": ver.summary(), "max_identity_gap": max(gaps)}
    checks = [
        _check("M = 2T + B + 1", H.M == 2 * prog.T + H.B + 1, H.M),
        _check("rejection = energy/M", max(gaps) <= 1e-9, max(gaps), 1e-9),
        _check("lambda_min <= 1 - val", ver.lambda_min <= 1 - ver.val + 1e-8, ver.lambda_min, 1e-8),
    ]
    return metrics, checks


def simulability_audit(cfg: ScenarioConfig):
    import itertools

    params = steane.CodeParams(int(cfg.params.get("kappa", 1)))
    trials = cfg.trials or 50
    rng = np.random.default_rng(cfg.seed)
    failures, tested, worst = 0, 0, 0.0
    for gate in ("H", "P", "CNOT", "T"):
        seq = steane.transversal_sequence(gate, params)
        blocks = seq.logical_wires + seq.magic_blocks
        n = seq.num_qubits
        for t in range(len(seq) + 1):
            bound = params.block_bound(t)
            subsets = [
                tuple(sorted(c))
                for c in itertools.chain.from_iterable(itertools.combinations(range(n), r) for r in range(1, 3))
                if max(sum(q // params.N == blk for q in c) for blk in range(blocks)) <= bound
            ]
            for S in subsets:
                tested += 1
                try:
                    ref = steane.sim_marginal(gate, t, S, params)
                except steane.NonSimulable:
                    failures += 1
                    continue
                for _ in range(max(1, trials // 25)):
                    logical = qsim.random_pure(seq.logical_wires, rng).amplitudes
                    full = np.kron(logical, steane.magic_state()) if seq.magic_blocks else logical
                    psi = steane.encode_vector(full, blocks, params)
                    psi = seq.apply(psi, t)
                    worst = max(worst, float(np.abs(qsim.reduced_from_vector(psi, S, n) - ref).max()))
    metrics = {"kappa": params.kappa, "subsets_tested": tested, "non_simulable": failures, "max_deviation": worst}
    checks = [_check("all simulable", failures == 0, failures), _check("matches brute force", worst <= 1e-9, worst, 1e-9)]
    return metrics, checks


def cross_term(cfg: ScenarioConfig):
    import itertools

    params = steane.CodeParams(1)
    N = params.N
    worst = 0.0
    count = 0
    for blocks in (1, 2):
        strings = ["".join(s) for s in itertools.product("01", repeat=blocks)]
        subsets = [tuple(sorted(c)) for c in itertools.product(*[range(b * N, (b + 1) * N) for b in range(blocks)])]
        subsets += [(q,) for q in range(blocks * N)]
        for a, bb in itertools.permutations(strings, 2):
            for S in subsets:
                worst = max(worst, steane.cross_term_norm(a, bb, S, params))
                count += 1
    return {"cases": count, "max_entry": worst}, [_check("cross terms vanish", worst <= 1e-10, worst, 1e-10)]


def comm_bound(cfg: ScenarioConfig):
    rng = np.random.default_rng(cfg.seed)
    rows, ok = [], True
    for b in (1, 2):
        for spec in (zkproto.toy_bell_spec(), zkproto.accept_all_spec(4, 1), zkproto.accept_all_spec(2, 2)):
            G = haar.sample_haar(3 * b, int(rng.integers(2**31)))
            _p, tr = zkproto.run_protocol_exact(spec, spec.sigma or qsim.PureState.zero(spec.N), G)
            cost = zkproto.comm_cost(tr, spec.k, spec.ell_L, spec.N, 3 * b)
            rows.append({"N": spec.N, "rounds": spec.ell_L, "k": spec.k, "b": b, **cost})
            ok &= cost["within_bound"]
    return {"fixtures": rows}, [_check("within bound", ok)]


def soundness_probe(cfg: ScenarioConfig):
    """Exploratory: cheating provers against the committed protocol, and the reduction's brackets."""
    trials = cfg.trials or 200
    b = int(cfg.params.get("b", 1))
    rng = np.random.default_rng(cfg.seed)
    spec = zkproto.toy_bell_spec()
    G = haar.sample_haar(3 * b, int(rng.integers(2**31)))
    rates = {}
    for name, prover in (("honest", zkproto.HonestProver()), ("empty", zkproto.EmptyProver()), ("tamper", zkproto.TamperProver(2))):
        acc = [zkproto.run_protocol_sampled(spec, spec.sigma, G, rng, prover)[0] for _ in range(trials)]
        rates[name] = float(np.mean(acc))
    contra = {"n": 1, "k": 1, "gamma": 1, "subsets": [[0], [0], [0]], "circuits": [[["CNOT", [0, 1]]], [["X", [1]], ["CNOT", [0, 1]]], [["CNOT", [0, 1]]]]}
    _H, ver = encver.reduce_localqma(qsat.QsatInstance.from_dict(cfg.params.get("instance", contra)))
    metrics = {"label": "exploratory", "acceptance_rates": rates, "trials": trials, "reduction": ver.summary()}
    checks = [_check("cheaters below honest", rates["empty"] < rates["honest"] and rates["tamper"] < rates["honest"], rates)]
    return metrics, checks


SCENARIOS = {
    "merkle-roundtrip": merkle_roundtrip,
    "protocol-completeness": protocol_completeness,
    "history-energy": history_energy,
    "venc-vanilla": venc_vanilla,
    "simulability-audit": simulability_audit,
    "cross-term": cross_term,
    "comm-bound": comm_bound,
    "soundness-probe": soundness_probe,
}


def run_scenario(cfg: ScenarioConfig) -> dict:
    if cfg.scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {cfg.scenario!r}; choose from {sorted(SCENARIOS)}")
    t0 = time.perf_counter()
    metrics, checks = SCENARIOS[cfg.scenario](cfg)
    return {
        "schema": SCHEMA,
        "scenario": cfg.scenario,
        "params": {**cfg.params, "trials": cfg.trials, "instance": cfg.instance},
        "seeds": {"seed": cfg.seed},
        "metrics": metrics,
        "checks": checks,
        "pass": all(c["pass"] for c in checks),
        "wall_time": time.perf_counter() - t0,
    }


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, set):
        return sorted(x)
    raise TypeError(type(x))


def build_config(argv=None) -> tuple[ScenarioConfig, str | None]:
    ap = argparse.ArgumentParser(prog="qzk", description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", choices=sorted(SCENARIOS))
    ap.add_argument("--config", help="JSON file; its keys override the other flags except --seed")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="write the JSON report here instead of stdout")
    ap.add_argument("--trials", type=int)
    args = ap.parse_args(argv)
    cfg = ScenarioConfig(args.scenario or "", args.seed, args.trials)
    if args.config:
        data = json.loads(Path(args.config).read_text())
        data.pop("seed", None)
        for key, value in data.items():
            if key not in asdict(cfg):
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    if not cfg.scenario:
        raise ConfigError("no scenario given")
    return cfg, args.out


def main(argv=None) -> int:
    try:
        cfg, out = build_config(argv)
        report = run_scenario(cfg)
    except (ConfigError, ValueError, qsim.CapacityError) as exc:
        print(f"qzk: error: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(report, indent=2, default=_json_default)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)
    return 0 if report["pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
