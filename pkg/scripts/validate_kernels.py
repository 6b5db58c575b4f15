#!/usr/bin/env python3
"""Self-checks for the walk machinery.

Confirms, on small grids, that the three exact walk-distribution
formulations agree pointwise, and that the cube-walk reversibility ratio
matches its product formula. Prints a line per check and exits non-zero
on the first disagreement.
"""

import argparse
import itertools
import sys

from hgm import validate
from hgm.grid import GridShape


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-n", type=int, default=4)
    ap.add_argument("--max-d", type=int, default=2)
    ap.add_argument("--max-tau", type=int, default=2)
    ap.add_argument("--tol", type=float, default=1e-12)
    args = ap.parse_args()

    ok = True
    ns = [n for n in (2, 4, 8, 16) if n <= args.max_n]
    for n, d, tau in itertools.product(ns, range(1, args.max_d + 1),
                                       range(1, args.max_tau + 1)):
        res = validate.equivalence_exact(GridShape(n, d), tau, tol=args.tol)
        worst = max(res.max_diffs.values())
        print(f"pmf n={n} d={d} tau={tau}: max diff {worst:.2e} "
              f"{'ok' if res.passed else 'MISMATCH'}")
        ok &= res.passed

    for row in validate.reversibility_scan(d=16, ell=3, eps=0.5):
        err = abs(row.ratio - row.product_formula)
        print(f"reversibility w={row.weight_x} t={row.t}: ratio error {err:.2e} "
              f"{'ok' if err < args.tol else 'MISMATCH'}")
        ok &= err < args.tol

    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
