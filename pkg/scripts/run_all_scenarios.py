"""Run every CLI scenario and write one JSON report per scenario."""

import argparse
from pathlib import Path

from qzk import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = {}
    for name in cli.SCENARIOS:
        argv = ["--scenario", name, "--seed", str(args.seed), "--out", str(out / f"{name}.json")]
        if args.trials:
            argv += ["--trials", str(args.trials)]
        status[name] = cli.main(argv)
        print(f"{name:24s} exit {status[name]}", flush=True)
    raise SystemExit(max(status.values()))


if __name__ == "__main__":
    main()
