"""Ground energy of H^enc against 1 - val on small vanilla instances.

Prints val, lambda_min, the upper bracket 1 - val and the measured constant
C = (1 - val) / sqrt(lambda_min) for every instance.
"""

import argparse
import json

from qzk import encver, qsat

ONE = [["CNOT", [0, 1]]]
ZERO = [["X", [1]], ["CNOT", [0, 1]]]
HADAMARD = [["H", [0]], ["CNOT", [0, 1]]]
T_CHECK = [["H", [0]], ["T", [0]], ["H", [0]], ["CNOT", [0, 1]]]

FIXTURES = {
    "contradiction": {"n": 1, "k": 1, "gamma": 1, "subsets": [[0], [0]], "circuits": [ONE, ZERO]},
    "one-or-plus": {"n": 1, "k": 1, "gamma": 1, "subsets": [[0], [0]], "circuits": [ONE, HADAMARD]},
    "t-rotated": {"n": 1, "k": 1, "gamma": 1, "subsets": [[0], [0]], "circuits": [ZERO, T_CHECK]},
    "three-checks": {"n": 1, "k": 1, "gamma": 1, "subsets": [[0], [0], [0]], "circuits": [ONE, ZERO, ONE]},
    "two-qubit": {"n": 2, "k": 1, "gamma": 1, "subsets": [[0], [1]], "circuits": [ONE, ZERO]},
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--only", nargs="*", choices=sorted(FIXTURES))
    ap.add_argument("--c-test", type=int, default=6)
    args = ap.parse_args()
    out = {}
    for name in args.only or FIXTURES:
        inst = qsat.QsatInstance.from_dict(FIXTURES[name])
        H, ver = encver.reduce_localqma(inst, c_test=args.c_test)
        out[name] = {"qubits": H.history.num_qubits, **ver.summary(), "upper_bracket": 1 - ver.val}
        print(name, json.dumps(out[name]), flush=True)


if __name__ == "__main__":
    main()
