"""Spencer ratios ||Ax||_inf / sqrt(n) against the random-coloring median, as a CSV table."""
import argparse
import csv
import sys

import numpy as np

from smallscale.discrepancy import ConstraintSystem, random_coloring_baseline, spencer_coloring


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    ap.add_argument("--matrices", type=int, default=20)
    ap.add_argument("--baseline-trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "matrix", "ratio", "baseline_median_ratio"])
    for n in a.sizes:
        # distinct trailing tags: SeedSequence ignores trailing zeros in the entropy list
        rng = np.random.default_rng([a.seed, n, 1])
        for i in range(a.matrices):
            A = ConstraintSystem.from_matrix(rng.choice([-1.0, 1.0], size=(n, n)))
            res = spencer_coloring(A, [a.seed, n, i, 2])
            base = random_coloring_baseline(A, a.baseline_trials, [a.seed, n, i, 3]).median_inf_norm
            w.writerow([n, i, f"{res.ratio:.4f}", f"{base / np.sqrt(n):.4f}"])


if __name__ == "__main__":
    main()
