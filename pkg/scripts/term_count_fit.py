"""Count H^enc terms over a (k, gamma) grid and fit M = a k + b gamma + c."""

import argparse
import itertools
import json

from qzk import encver, qsat, steane


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--kappa", type=int, nargs="+", default=[0, 1])
    ap.add_argument("--c-test", type=int, default=encver.C_TEST)
    args = ap.parse_args()
    out = {}
    for kappa in args.kappa:
        rows, table = [], []
        for k, gamma in itertools.product((1, 2, 3), (1, 2)):
            inst = qsat.QsatInstance(3, k, gamma, [tuple(range(k))] * 2, [qsat.always_accept_circuit(k)] * 2)
            prog = encver.build_program(inst, steane.CodeParams(kappa), args.c_test)
            H = encver.build_encoded_hamiltonian(prog)
            rows.append((k, gamma, H.M))
            table.append({"k": k, "gamma": gamma, "T": prog.T, "M": H.M, "phases": prog.phase_lengths})
        coef, resid = encver.fit_term_count(rows)
        out[f"kappa={kappa}"] = {"rows": table, "fit": dict(zip("abc", coef)), "residual": resid}
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
