#!/usr/bin/env python3
"""Distance under random subgrid restriction.

Takes a far-from-monotone function, restricts it to many random k^d
subgrids, and compares the restricted distances to the full-grid distance.
This is the reduction the full tester relies on: restrictions typically
keep a constant fraction of the distance.
"""

import argparse

from hgm import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--family", default="surface")
    ap.add_argument("--n", type=int, default=16)
    ap.add_argument("--d", type=int, default=4)
    ap.add_argument("--k", type=int, default=8, help="subgrid side length")
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    argv = [
        "domain-reduce", "--family", args.family, "--n", str(args.n),
        "--d", str(args.d), "--k", str(args.k), "--reps", str(args.reps),
        "--seed", str(args.seed),
    ]
    if args.out:
        argv += ["--out", args.out]
    return cli.main(argv)


if __name__ == "__main__":
    raise SystemExit(main())
