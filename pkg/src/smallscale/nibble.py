"""Independent sets in sparse graphs: greedy baseline and the iterated nibble."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument


class SparseGraph:
    """Undirected simple graph on vertices ``0..n-1`` stored as a CSR adjacency matrix."""

    def __init__(self, n, adjacency):
        A = sp.csr_matrix(adjacency, shape=(n, n), dtype=np.int32)
        A.sum_duplicates()
        A.sort_indices()
        A.data[:] = 1
        if A.diagonal().any():
            raise InvalidArgument("self-loops are not allowed")
        if (A != A.T).nnz:
            raise InvalidArgument("adjacency must be symmetric")
        self.n = int(n)
        self.A = A
        self._codegree = None

    @classmethod
    def from_edges(cls, n, edges):
        e = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if e.size and (e.min() < 0 or e.max() >= n):
            raise InvalidArgument("vertex id out of range")
        e = e[e[:, 0] != e[:, 1]]
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(rows.size, dtype=np.int32)
        return cls(n, sp.coo_matrix((data, (rows, cols)), shape=(n, n)))

    def neighbors(self, v):
        return self.A.indices[self.A.indptr[v]:self.A.indptr[v + 1]]

    @property
    def degrees(self):
        return np.diff(self.A.indptr)

    @property
    def max_degree(self):
        return int(self.degrees.max()) if self.n else 0

    @property
    def max_codegree(self):
        if self._codegree is None:
            self._codegree = max_codegree(self.A)
        return self._codegree

    @property
    def edge_count(self):
        return self.A.nnz // 2

    def edges(self):
        U = sp.triu(self.A, k=1).tocoo()
        order = np.lexsort((U.col, U.row))
        return np.column_stack([U.row[order], U.col[order]])

    def induced(self, mask):
        idx = np.flatnonzero(mask)
        return SparseGraph(idx.size, self.A[idx][:, idx]), idx

    def is_independent(self, vertices):
        v = np.zeros(self.n, dtype=bool)
        v[np.asarray(list(vertices), dtype=np.int64)] = True
        return self.A[v][:, v].nnz == 0


def max_codegree(A, chunk=2048):
    """Largest number of common neighbours over distinct vertex pairs (chunked A @ A)."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    best = 0
    At = A.T.tocsr()
    for s in range(0, n, chunk):
        block = (A[s:s + chunk] @ At).tocoo()
        off = block.row + s != block.col
        if off.any():
            best = max(best, int(block.data[off].max()))
    return best


def graph_stats(G):
    return {
        "n": G.n,
        "max_degree": G.max_degree,
        "max_codegree": G.max_codegree,
        "avg_degree": float(G.degrees.mean()) if G.n else 0.0,
    }


def _greedy(A, candidates, rng):
    taken = []
    free = np.zeros(A.shape[0], dtype=bool)
    free[candidates] = True
    indptr, indices = A.indptr, A.indices
    for v in rng.permutation(candidates):
        if free[v]:
            taken.append(int(v))
            free[v] = False
            free[indices[indptr[v]:indptr[v + 1]]] = False
    return taken


def greedy_independent_set(G, rng_seed):
    """Maximal independent set from a uniformly random vertex order."""
    rng = np.random.default_rng(rng_seed)
    return sorted(_greedy(G.A, np.arange(G.n), rng))


def shearer_target(n, d):
    if d <= 1:
        raise InvalidArgument("d must exceed 1")
    return n * math.log(d) / d


@dataclass
class NibbleRound:
    round: int
    p: float
    selected: int
    cleaned: int
    added: int
    surviving: int
    open_fraction: float
    predicted_open: float
    avg_degree: float
    max_degree: int
    max_codegree: int | None
    expected_surviving: float
    binomial_sd: float


@dataclass
class NibbleTrace:
    gamma: float
    Delta: int
    n: int
    rounds: list = field(default_factory=list)
    remnant: int = 0
    remnant_added: int = 0
    double_count_checks: int = 0
    double_count_failures: int = 0

    def to_rows(self):
        return [asdict(r) for r in self.rounds]

    def to_csv(self):
        buf = io.StringIO()
        cols = list(NibbleRound.__dataclass_fields__)
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in self.rounds:
            w.writerow(asdict(r))
        return buf.getvalue()

    def to_dict(self):
        return {"gamma": self.gamma, "Delta": self.Delta, "n": self.n, "rounds": self.to_rows(),
                "remnant": self.remnant, "remnant_added": self.remnant_added,
                "double_count_checks": self.double_count_checks,
                "double_count_failures": self.double_count_failures}


def double_count_sides(A, alive, x):
    """Both sides of sum_{y in Y} |X cap N(y)|^2 <= sum_{y,z in X} |N(y) cap N(z)|.

    Here ``X = N(x)`` inside the surviving graph and ``Y = N(X) minus (X + x)``;
    the right side equals ``sum_v |N(v) cap X|^2`` over all surviving ``v``.
    """
    nb = A.indices[A.indptr[x]:A.indptr[x + 1]]
    X = nb[alive[nb]]
    if X.size == 0:
        return 0, 0
    hits = np.asarray(A[X].sum(axis=0)).ravel()
    hits[~alive] = 0
    rhs = int((hits.astype(np.int64) ** 2).sum())
    inY = hits > 0
    inY[X] = False
    inY[x] = False
    lhs = int((hits[inY].astype(np.int64) ** 2).sum())
    return lhs, rhs


def nibble_independent_set(G, gamma=0.125, rng_seed=0, track_codegree=True, double_count_samples=100):
    """Iterated nibble; returns ``(sorted vertex list, NibbleTrace)``.

    Round i keeps each surviving vertex with probability
    ``gamma / ((1-gamma)^(i-1) * Delta)``, drops the larger endpoint of every
    internal edge, adds the rest and removes it with its neighbourhood. Stops
    once at most ``n / Delta`` vertices survive and finishes greedily.
    """
    if not 0 < gamma <= 0.25:
        raise InvalidArgument("gamma must lie in (0, 1/4]")
    rng = np.random.default_rng(rng_seed)
    n = G.n
    Delta = G.max_degree
    trace = NibbleTrace(gamma, Delta, n)
    if Delta < 2:
        chosen = greedy_independent_set(G, rng.integers(2 ** 63))
        trace.remnant = n
        trace.remnant_added = len(chosen)
        return chosen, trace
    A = G.A
    alive = np.ones(n, dtype=bool)
    chosen = []
    stop = n / Delta
    max_rounds = int(math.ceil(4 * math.log(Delta) / gamma)) + 10
    # spread the audit over roughly the first half of the expected rounds
    expected_rounds = math.log(Delta) / -math.log(1.0 - gamma)
    checks_per_round = max(1, math.ceil(double_count_samples / max(1.0, expected_rounds / 2)))
    i = 0
    while alive.sum() > stop and i < max_rounds:
        i += 1
        before = int(alive.sum())
        p = min(1.0, gamma / ((1.0 - gamma) ** (i - 1) * Delta))
        live_idx = np.flatnonzero(alive)
        deg_live = np.asarray(A[live_idx][:, live_idx].sum(axis=1)).ravel()
        avg_deg = float(deg_live.mean()) if deg_live.size else 0.0
        max_deg = int(deg_live.max()) if deg_live.size else 0
        co = None
        if track_codegree:
            co = max_codegree(A[live_idx][:, live_idx]) if live_idx.size else 0
        # double counting audit at random surviving vertices
        if trace.double_count_checks < double_count_samples:
            k = min(checks_per_round, double_count_samples - trace.double_count_checks, live_idx.size)
            for x in rng.choice(live_idx, size=k, replace=False):
                lhs, rhs = double_count_sides(A, alive, int(x))
                trace.double_count_checks += 1
                trace.double_count_failures += int(lhs > rhs)
        sel = alive & (rng.random(n) < p)
        sel_idx = np.flatnonzero(sel)
        if sel_idx.size == 0:
            continue
        internal = sp.triu(A[sel_idx][:, sel_idx], k=1).tocoo()
        drop = np.unique(sel_idx[internal.col])
        keep = np.setdiff1d(sel_idx, drop, assume_unique=True)
        chosen.extend(int(v) for v in keep)
        kill = np.zeros(n, dtype=bool)
        kill[keep] = True
        kill[np.asarray(A[keep].sum(axis=0)).ravel() > 0] = True
        alive &= ~kill
        after = int(alive.sum())
        q = (1.0 - gamma) ** i
        trace.rounds.append(NibbleRound(
            round=i, p=p, selected=int(sel_idx.size), cleaned=int(drop.size), added=int(keep.size),
            surviving=after, open_fraction=after / before, predicted_open=(1.0 - p) ** (avg_deg + 1),
            avg_degree=avg_deg, max_degree=max_deg, max_codegree=co,
            expected_surviving=q * n, binomial_sd=math.sqrt(n * q * (1.0 - q)),
        ))
    rest = np.flatnonzero(alive)
    extra = _greedy(A, rest, rng) if rest.size else []
    trace.remnant = int(rest.size)
    trace.remnant_added = len(extra)
    chosen.extend(extra)
    chosen.sort()
    if not G.is_independent(chosen):
        raise AssertionError("nibble produced a dependent set")
    return chosen, trace


def near_regular_graph(n, d, rng_seed):
    """Configuration-model pairing of ``d`` stubs per vertex with loops and repeats dropped."""
    if n * d % 2:
        raise InvalidArgument("n * d must be even")
    rng = np.random.default_rng(rng_seed)
    stubs = rng.permutation(np.repeat(np.arange(n), d)).reshape(-1, 2)
    stubs = stubs[stubs[:, 0] != stubs[:, 1]]
    stubs.sort(axis=1)
    stubs = np.unique(stubs, axis=0)
    return SparseGraph.from_edges(n, stubs)


def disjoint_cliques(k, size):
    edges = [(c * size + a, c * size + b) for c in range(k) for a in range(size) for b in range(a + 1, size)]
    return SparseGraph.from_edges(k * size, edges)


def read_edge_list(text, n=None):
    """Two 1-based vertex ids per line; ``#`` starts a comment."""
    pairs = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        a, b = line.split()[:2]
        pairs.append((int(a) - 1, int(b) - 1))
    if n is None:
        n = 1 + max((max(p) for p in pairs), default=-1)
    return SparseGraph.from_edges(n, pairs)


def write_edge_list(G):
    return "".join(f"{a + 1} {b + 1}\n" for a, b in G.edges())
