#!/usr/bin/env python3
"""Cross-validate the three gradient estimators on a smooth payoff.

Pathwise differentiation, the occupation-normalized weight, and the
elapsed-time weight all target the same derivative; pairwise z-scores
beyond the threshold indicate a bias in one of them.
"""

import argparse

from degenbsde.cli import run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--model", default="tanh_smooth")
    ap.add_argument("--t0", type=float, default=0.0)
    ap.add_argument("--x0", type=float, default=0.0)
    ap.add_argument("--n-paths", type=int, default=100_000)
    ap.add_argument("--n-steps", type=int, default=500)
    ap.add_argument("--z-max", type=float, default=3.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default=".")
    args = ap.parse_args()

    res = run_experiment({
        "experiment": "weight-crossval",
        "model": args.model,
        "t0": args.t0,
        "x0": args.x0,
        "n_paths": args.n_paths,
        "n_steps": args.n_steps,
        "z_max": args.z_max,
        "seed": args.seed,
    }, out_dir=args.out_dir)
    for path in res.outputs:
        print(f"wrote {path}")
    for c in res.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{c.name}: {status} ({c.measured}; requires {c.requirement})")
    return 0 if res.ok else 3


if __name__ == "__main__":
    raise SystemExit(main())
