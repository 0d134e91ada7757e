"""Build a flat Littlewood polynomial and write its |P(e^{ix})| curve as SVG plus a summary line."""
import argparse
import math

from smallscale.littlewood import abs_curve, assemble_flat_littlewood, flatness_report
from smallscale.plots import line_svg


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--gamma", type=float, default=1 / 32)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--svg", default="flatpoly.svg")
    a = ap.parse_args()
    P = assemble_flat_littlewood(a.n, a.gamma, a.gamma / 4, a.seed)
    rep = flatness_report(P)
    root = math.sqrt(4 * a.n)
    x, y = abs_curve(P)
    with open(a.svg, "w", encoding="utf-8") as fh:
        fh.write(line_svg(x, y, f"|P| for n = {a.n}", "x", "|P(e^ix)|",
                          hlines=[(0.02 * root, "red"), (root, "gray")]))
    print(f"n={a.n} min/sqrt(4n)={rep['min_abs'] / root:.4f} max/sqrt(4n)={rep['max_abs'] / root:.3f} "
          f"attempts={P.meta['attempts']}")


if __name__ == "__main__":
    main()
