"""Run the committed protocol on the Bell fixture and dump one transcript."""

import argparse
import json

from qzk import haar, zkproto


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--b", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    spec = zkproto.toy_bell_spec()
    oracle = haar.sample_haar(3 * args.b, seed=args.seed)
    rates = {}
    for name, prover in (
        ("honest", zkproto.HonestProver()),
        ("empty", zkproto.EmptyProver()),
        ("tamper", zkproto.TamperProver(node=3, round_=1)),
    ):
        p, tr = zkproto.run_protocol_exact(spec, spec.sigma, oracle, prover)
        rates[name] = p
        if name == "honest":
            transcript = tr.to_dict()
            cost = zkproto.comm_cost(tr, spec.k, spec.ell_L, spec.N, 3 * args.b)
    print(json.dumps({"seed": args.seed, "b": args.b, "acceptance": rates, "comm": cost, "transcript": transcript}, indent=2))


if __name__ == "__main__":
    main()
