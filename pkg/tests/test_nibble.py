import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, strategies as st

from smallscale.errors import InvalidArgument
from smallscale.nibble import (
    SparseGraph, disjoint_cliques, double_count_sides, graph_stats, greedy_independent_set,
    max_codegree, near_regular_graph, nibble_independent_set, read_edge_list, shearer_target,
    write_edge_list,
)

from shared_runs import nibble_graph


def complete(n):
    return SparseGraph.from_edges(n, itertools.combinations(range(n), 2))


@st.composite
def graphs(draw, max_n=30):
    n = draw(st.integers(1, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    chosen = draw(st.lists(st.sampled_from(pairs), max_size=80)) if pairs else []
    return SparseGraph.from_edges(n, chosen)


def merge_codegree(G):
    best = 0
    nbrs = [set(G.neighbors(v).tolist()) for v in range(G.n)]
    for u, v in itertools.combinations(range(G.n), 2):
        best = max(best, len(nbrs[u] & nbrs[v]))
    return best


# ---- graph statistics

def test_stats_triangle():
    s = graph_stats(complete(3))
    assert (s["max_degree"], s["max_codegree"]) == (2, 1)


def test_stats_k22():
    G = SparseGraph.from_edges(4, [(0, 2), (0, 3), (1, 2), (1, 3)])
    s = graph_stats(G)
    assert (s["max_degree"], s["max_codegree"]) == (2, 2)


def test_stats_empty():
    s = graph_stats(SparseGraph.from_edges(5, []))
    assert (s["max_degree"], s["max_codegree"]) == (0, 0)


@given(graphs())
def test_codegree_matches_merge(G):
    assert G.max_codegree == merge_codegree(G)
    assert max_codegree(G.A, chunk=3) == G.max_codegree
    assert G.max_degree == max((len(G.neighbors(v)) for v in range(G.n)), default=0)


def test_graph_rejects_bad_adjacency():
    with pytest.raises(InvalidArgument):
        SparseGraph(2, sp.csr_matrix(np.array([[0, 1], [0, 0]])))
    with pytest.raises(InvalidArgument):
        SparseGraph(2, sp.csr_matrix(np.eye(2)))


# ---- greedy

def test_greedy_empty():
    assert greedy_independent_set(SparseGraph.from_edges(6, []), 0) == list(range(6))


def test_greedy_complete():
    assert len(greedy_independent_set(complete(7), 0)) == 1


def test_greedy_c5():
    C5 = SparseGraph.from_edges(5, [(i, (i + 1) % 5) for i in range(5)])
    for seed in range(10):
        assert len(greedy_independent_set(C5, seed)) == 2


@given(graphs(), st.integers(0, 2 ** 32))
def test_greedy_maximal_and_large(G, seed):
    I = greedy_independent_set(G, seed)
    assert G.is_independent(I)
    assert len(I) >= G.n / (G.max_degree + 1)
    inside = np.zeros(G.n, dtype=bool)
    inside[I] = True
    for v in range(G.n):
        assert inside[v] or inside[G.neighbors(v)].any()


# ---- nibble

def test_nibble_empty_graph():
    I, _ = nibble_independent_set(SparseGraph.from_edges(9, []), 0.125, 0)
    assert I == list(range(9))


def test_nibble_disjoint_cliques():
    G = disjoint_cliques(1000, 9)
    I, _ = nibble_independent_set(G, 0.125, 3)
    assert G.max_degree == 8
    assert len(I) >= 0.9 * 9000 / 9


@given(graphs(40), st.integers(0, 2 ** 32), st.sampled_from([0.05, 0.125, 0.25]))
def test_nibble_output_independent(G, seed, gamma):
    I, trace = nibble_independent_set(G, gamma, seed, double_count_samples=10)
    assert G.is_independent(I)
    assert len(set(I)) == len(I)
    assert sum(r.added for r in trace.rounds) + trace.remnant_added == len(I)
    assert trace.double_count_failures == 0


def test_nibble_rejects_gamma():
    with pytest.raises(InvalidArgument):
        nibble_independent_set(complete(4), 0.3, 0)


def test_nibble_trace_invariants():
    G = near_regular_graph(3000, 24, 2)
    I, trace = nibble_independent_set(G, 0.125, 5)
    surv = [r.surviving for r in trace.rounds]
    assert all(a > b for a, b in zip(surv, surv[1:]))
    assert all(r.added == r.selected - r.cleaned for r in trace.rounds)
    assert trace.remnant <= 3000 / G.max_degree
    for i, r in enumerate(trace.rounds):
        assert r.p == pytest.approx(min(1.0, 0.125 / (0.875 ** (r.round - 1) * G.max_degree)))


def test_nibble_large_near_regular():
    G = nibble_graph()
    I, trace = nibble_independent_set(G, 0.125, 3)
    D = G.max_degree
    assert 60 <= D <= 64 and G.max_codegree <= 8
    assert G.is_independent(I)
    assert len(I) >= 0.7 * shearer_target(G.n, D)


def test_nibble_open_fraction_prediction():
    G = nibble_graph()
    _, trace = nibble_independent_set(G, 0.125, 3)
    for r in trace.rounds:
        assert 0.5 <= r.open_fraction / r.predicted_open <= 2.0


def test_nibble_double_count_audit():
    G = nibble_graph()
    _, trace = nibble_independent_set(G, 0.125, 3)
    assert trace.double_count_checks == 100
    assert trace.double_count_failures == 0


def test_nibble_surviving_counts_follow_binomial():
    G = near_regular_graph(20000, 64, 4)
    _, trace = nibble_independent_set(G, 0.125, 4, track_codegree=False)
    z = [(r.surviving - r.expected_surviving) / r.binomial_sd for r in trace.rounds]
    print("z-scores", np.round(z, 2).tolist())
    assert all(abs(v) <= 3 for v in z)


def test_double_count_sides_by_hand():
    # path 0-1-2-3 plus chord 1-3: N(0) = {1}, Y = {2, 3}
    G = SparseGraph.from_edges(4, [(0, 1), (1, 2), (2, 3), (1, 3)])
    lhs, rhs = double_count_sides(G.A, np.ones(4, dtype=bool), 0)
    assert lhs == 2 and rhs == 3


# ---- targets and I/O

def test_shearer_values():
    assert shearer_target(100, math.e) == pytest.approx(100 / math.e)
    assert shearer_target(1000, 64) == pytest.approx(64.98, abs=0.01)
    assert shearer_target(2, 2) == pytest.approx(math.log(2))
    with pytest.raises(InvalidArgument):
        shearer_target(10, 1)


def test_edge_list_roundtrip():
    G = near_regular_graph(50, 4, 0)
    text = write_edge_list(G)
    H = read_edge_list("# header\n" + text, 50)
    assert (H.A != G.A).nnz == 0
    assert min(int(t) for t in text.split()) >= 1


def test_trace_csv():
    G = near_regular_graph(2000, 16, 0)
    _, trace = nibble_independent_set(G, 0.125, 0)
    lines = trace.to_csv().splitlines()
    assert lines[0].startswith("round,p,selected,cleaned")
    assert len(lines) == len(trace.rounds) + 1
