"""Calibrate the reverse Hölder safety factor tau on the bundled weights.

For each suite weight this prints the A_inf constant and the self-improvement
margin at delta = 1/(tau [w]_Ainf), then reports the smallest tau >= 1 that
makes every member pass the factor-2 bound, at each requested resolution.

Usage: python3 scripts/calibrate_tau.py [--dim D] [--resolutions N ...]
"""
import argparse
import sys

from wnilab import (
    ainf_constant,
    calibrate_tau,
    lattice_cubes,
    make_grid,
    reverse_holder_check,
    weight_suite,
)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--dim", type=int, default=1, choices=(1, 2))
    ap.add_argument("--resolutions", type=int, nargs="+", default=[256, 512, 1024])
    ap.add_argument("--side-length", type=float, default=8.0)
    ap.add_argument("--random-count", type=int, default=10)
    args = ap.parse_args(argv)

    for n in args.resolutions:
        grid = make_grid(args.dim, n, args.side_length)
        lattice = lattice_cubes(grid, grid.cells_per_side.bit_length() - 1)
        suite = weight_suite(grid, random_count=args.random_count)
        tau = calibrate_tau([w for _, w in suite], lattice)
        print(f"\nN = {n}: calibrated tau = {tau:.4f}")
        print(f"{'weight':>12s} {'ainf':>9s} {'margin at 1/(tau ainf)':>24s}")
        for wid, w in suite:
            ainf = ainf_constant(w, lattice)
            margin = reverse_holder_check(w, lattice, 1.0 / (tau * ainf))
            print(f"{wid:>12s} {ainf:9.4f} {margin:24.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
