"""Sweep the log-bump exponent delta in the two-weight comparison.

Measures ||Tf||_{L^p(w)} / ||f||_{L^p(M_{A_p} w)} with A = t^p log(e+t)^{p-1+delta}
on a fine delta grid for each suite weight.  The ratio should grow as delta
drops toward 0, where the majorant degenerates to the plain maximal bound.

Usage: python3 scripts/bump_delta_sweep.py [--out sweep.csv] [--p P] [--n N]
"""
import argparse
import csv
import sys

import numpy as np

from wnilab import (
    bump,
    make_grid,
    power_log,
    rough_kernel,
    sample_angles,
    sign_kernel,
    two_weight_bump_ratio,
    weight_suite,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=1, choices=(1, 2))
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--deltas", type=float, nargs="+", default=[2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125])
    ap.add_argument("--random-count", type=int, default=2)
    ap.add_argument("--out", default="bump_delta_sweep.csv")
    args = ap.parse_args(argv)

    grid = make_grid(args.dim, args.n, 8.0)
    K = sign_kernel() if args.dim == 1 else rough_kernel(np.sign(np.cos(sample_angles(256))))
    f = bump(grid)
    rows = []
    for wid, w in weight_suite(grid, random_count=args.random_count):
        line = [wid]
        for d in args.deltas:
            rep = two_weight_bump_ratio(f, w, args.p, power_log(args.p, d), K)
            line.append(rep.ratio)
        rows.append(line)
        print(wid, " ".join(f"{r:.4f}" for r in line[1:]))

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["weight_id"] + [f"delta_{d:g}" for d in args.deltas])
        writer.writerows(rows)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
