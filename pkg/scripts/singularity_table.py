"""Singularity frequencies of random sign matrices for a range of n, with exact values where enumerable."""
import argparse
import csv
import sys

from smallscale.lwo import singularity_mc


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ensemble", choices=["symmetric", "iid"], default="symmetric")
    ap.add_argument("--max-n", type=int, default=12)
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n", "p_hat", "stderr", "exact"])
    for n in range(1, a.max_n + 1):
        r = singularity_mc(a.ensemble, n, a.trials, [a.seed, n])
        w.writerow([n, f"{r['p_hat']:.5f}", f"{r['stderr']:.5f}", r["exact"] or ""])


if __name__ == "__main__":
    main()
