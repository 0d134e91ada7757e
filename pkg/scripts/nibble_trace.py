"""Per-round nibble trace on a near-regular graph, next to the greedy baseline and the n ln D / D target."""
import argparse
import sys

from smallscale.nibble import (greedy_independent_set, near_regular_graph, nibble_independent_set,
                               shearer_target)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=20000)
    ap.add_argument("--d", type=int, default=64)
    ap.add_argument("--gamma", type=float, default=0.125)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()
    G = near_regular_graph(a.n, a.d, a.seed)
    I, trace = nibble_independent_set(G, a.gamma, a.seed)
    greedy = greedy_independent_set(G, a.seed)
    sys.stdout.write(trace.to_csv())
    D = G.max_degree
    print(f"# nibble={len(I)} greedy={len(greedy)} target={shearer_target(G.n, D):.1f} "
          f"Delta={D} Delta2={G.max_codegree} double_count_failures={trace.double_count_failures}",
          file=sys.stderr)


if __name__ == "__main__":
    main()
