"""Clustering-rate ratios for the rank-one two-block model.

Prints rho*_ASE / rho*_OSE-A over a coarse (p, r) grid with q = p + r.
Values below one mean the one-step estimator separates the blocks better.

    python demos/chernoff_ratios.py --grid 6
"""

import argparse

import numpy as np

from rdpg_onestep import chernoff_ratio_grid, two_block_rank_one


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--grid", type=int, default=6)
    parser.add_argument("--n", type=int, default=1000)
    args = parser.parse_args()

    p = np.linspace(0.2, 0.8, args.grid)
    r = np.linspace(-0.15, 0.15, args.grid)
    table = chernoff_ratio_grid(lambda a, b: two_block_rank_one(a, a + b), p, r, ("ASE", "OSE_A"), n=args.n)
    ratios = table[:, 2].reshape(p.size, r.size)
    print("p \\ r  " + " ".join(f"{v:8.3f}" for v in r))
    for pv, row in zip(p, ratios):
        print(f"{pv:6.3f} " + " ".join(f"{v:8.5f}" for v in row))


if __name__ == "__main__":
    main()
