"""Discrepancy-minimizing sign assignments.

Evaluation (AP discrepancy), a random-coloring baseline, the Beck-Fiala
floating-coloring algorithm, a Lovett-Meka style partial coloring walk, the
iterated Spencer coloring built on it, and an exhaustive partial-coloring
oracle for small instances.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse

from .errors import InvalidArgument, RetryableFailure, SizeLimitError
from .walk import DenseRows, sticky_walk

FROZEN_TOL = 1e-12
LM_GATE = 1.0 / 16.0


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class ConstraintSystem:
    """Rows ``a_j`` (an ``m x n`` array) with per-row budgets ``c_j`` in units of sqrt(n)."""

    rows: np.ndarray
    budgets: np.ndarray
    spencer_normalized: bool = False

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        if rows.size == 0 and rows.shape[-1] == 0:
            raise InvalidArgument("rows must have length n >= 1")
        budgets = np.asarray(self.budgets, dtype=float).reshape(-1)
        if budgets.shape[0] != rows.shape[0]:
            raise InvalidArgument("budgets length must equal the number of rows")
        if np.any(budgets < 0) or not np.all(np.isfinite(rows)):
            raise InvalidArgument("budgets must be non-negative and rows finite")
        if self.spencer_normalized and np.any(np.abs(rows) > 1.0):
            raise InvalidArgument("Spencer-normalized system has an entry above 1 in absolute value")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "budgets", budgets)

    @classmethod
    def from_matrix(cls, A, budgets=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        if budgets is None:
            budgets = np.zeros(A.shape[0])
        elif np.isscalar(budgets):
            budgets = np.full(A.shape[0], float(budgets))
        return cls(A, budgets, spencer_normalized=bool(np.all(np.abs(A) <= 1.0)))

    @property
    def m(self):
        return self.rows.shape[0]

    @property
    def n(self):
        return self.rows.shape[1]

    def gate(self):
        """Lovett-Meka budget sum, ``sum_j exp(-c_j^2 / 16)``."""
        return float(np.sum(np.exp(-self.budgets ** 2 / 16.0)))


@dataclass(frozen=True)
class PartialColoring:
    values: np.ndarray
    frozen: frozenset = frozenset()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if np.any(np.abs(v) > 1.0 + FROZEN_TOL):
            raise InvalidArgument("partial coloring entries must lie in [-1, 1]")
        v = np.clip(v, -1.0, 1.0)
        frozen = frozenset(int(i) for i in self.frozen)
        if any(abs(abs(v[i]) - 1.0) > FROZEN_TOL for i in frozen):
            raise InvalidArgument("frozen coordinate is not at +-1")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "frozen", frozen)

    @classmethod
    def from_values(cls, values):
        v = np.asarray(values, dtype=float)
        return cls(v, frozenset(np.flatnonzero(np.abs(np.abs(v) - 1.0) <= FROZEN_TOL).tolist()))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros(n))

    @property
    def n(self):
        return self.values.size


@dataclass(frozen=True)
class SignedColoring:
    signs: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.signs).reshape(-1)
        if s.size and not np.all((s == 1) | (s == -1)):
            raise InvalidArgument("signed coloring entries must be exactly +-1")
        object.__setattr__(self, "signs", s.astype(np.int64))

    @property
    def n(self):
        return self.signs.size


@dataclass(frozen=True)
class Hypergraph:
    """Edges over the ground set ``{0, ..., n-1}`` (files use 1-based ids)."""

    n: int
    edges: tuple
    max_degree: int = field(init=False)

    def __post_init__(self):
        if self.n < 0:
            raise InvalidArgument("ground set size must be non-negative")
        edges = tuple(frozenset(int(v) for v in e) for e in self.edges)
        deg = np.zeros(self.n, dtype=np.int64)
        for e in edges:
            for v in e:
                if not 0 <= v < self.n:
                    raise InvalidArgument(f"vertex {v} outside ground set of size {self.n}")
                deg[v] += 1
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "max_degree", int(deg.max()) if self.n else 0)

    def incidence(self):
        M = np.zeros((len(self.edges), self.n))
        for j, e in enumerate(self.edges):
            M[j, list(e)] = 1.0
        return M

    def discrepancy(self, coloring):
        s = coloring.signs
        return max((abs(int(s[list(e)].sum())) for e in self.edges if e), default=0)


# ---------------------------------------------------------------- AP discrepancy


def _progression_blocks(f, a):
    n = f.size
    L = -(-n // a)
    padded = np.zeros(L * a, dtype=np.int64)
    padded[:n] = f
    return padded.reshape(L, a)


def ap_discrepancy(f):
    """Max over progressions ``{b, b+a, ...}`` of the largest absolute segment sum.

    Prefix sums along each residue class give every segment as a difference,
    so the answer per class is ``max(prefix) - min(prefix)`` with a leading 0.
    """
    s = f.signs if isinstance(f, SignedColoring) else np.asarray(f, dtype=np.int64)
    n = s.size
    if n < 1:
        raise InvalidArgument("need n >= 1")
    best = 0
    for a in range(1, n + 1):
        P = np.cumsum(_progression_blocks(s, a), axis=0)
        hi = np.maximum(P.max(axis=0), 0)
        lo = np.minimum(P.min(axis=0), 0)
        best = max(best, int((hi - lo).max()))
    return best


def ap_discrepancy_full(f):
    """Roth's D(f): progressions run from b to the end of [n] (f is zero beyond n)."""
    s = f.signs if isinstance(f, SignedColoring) else np.asarray(f, dtype=np.int64)
    n = s.size
    if n < 1:
        raise InvalidArgument("need n >= 1")
    best = 0
    for a in range(1, n + 1):
        B = _progression_blocks(s, a)
        suffix = np.cumsum(B[::-1], axis=0)
        best = max(best, int(np.abs(suffix).max()))
    return best


# ---------------------------------------------------------------- baselines


@dataclass(frozen=True)
class BaselineSummary:
    median_inf_norm: float
    max_inf_norm: float
    trials: int
    seed: int


def random_coloring_baseline(A, trials, rng_seed):
    if trials <= 0:
        raise InvalidArgument("trials must be positive")
    if not A.spencer_normalized:
        raise InvalidArgument("baseline expects a Spencer-normalized system")
    rng = np.random.default_rng(rng_seed)
    X = rng.choice(np.array([-1.0, 1.0]), size=(trials, A.n))
    norms = np.abs(X @ A.rows.T).max(axis=1) if A.m else np.zeros(trials)
    return BaselineSummary(float(np.median(norms)), float(norms.max()), trials, rng_seed)


# ---------------------------------------------------------------- Beck-Fiala


def _kernel_basis(M):
    """Orthonormal basis (columns) of the null space of M."""
    if M.shape[0] == 0:
        return np.eye(M.shape[1])
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    rank = int((s > 1e-10 * max(1.0, s[0])).sum())
    return Vt[rank:].T.copy()


def beck_fiala(H):
    """Floating-coloring algorithm; every edge ends with ``|sum| <= 2d - 1``.

    Edges with more than ``d`` floating vertices are active and keep their sum
    at zero. Active edges are fewer than floating variables (each variable is
    in at most ``d`` edges), so a kernel direction exists; moving along it
    until a variable reaches +-1 fixes at least one variable per step.
    """
    n = H.n
    d = H.max_degree
    x = np.zeros(n)
    fixed = np.zeros(n, dtype=bool)
    inc = H.incidence()
    floating = np.arange(n)
    N = None  # kernel basis over `floating`, valid for the current active set or a superset
    it = 0
    while floating.size:
        active = inc[:, floating].sum(axis=1) > d
        if not active.any():
            break
        if N is None or N.shape[1] == 0:
            N = _kernel_basis(inc[np.ix_(active, floating)])
            if N.shape[1] == 0:
                break
        y = N[:, 0]
        xf = x[floating]
        nz = np.abs(y) > 1e-12 * np.abs(y).max()
        t = np.min((np.sign(y[nz]) - xf[nz]) / y[nz])
        xf = xf + t * y
        hit = np.abs(np.abs(xf) - 1.0) <= 1e-9
        if not hit.any():
            hit[np.argmax(np.abs(xf))] = True
        xf[hit] = np.sign(xf[hit])
        x[floating] = xf
        fixed[floating[hit]] = True
        # restrict the kernel basis to vectors vanishing on the newly fixed coordinates
        for i in np.flatnonzero(hit):
            if N.shape[1] == 0:
                break
            c = int(np.argmax(np.abs(N[i])))
            if abs(N[i, c]) > 1e-12:
                N = N - np.outer(N[:, c], N[i] / N[i, c])
                N = np.delete(N, c, axis=1)
        keep = ~hit
        floating = floating[keep]
        N = N[keep]
        it += 1
        if N.shape[1] and it % 16 == 0:
            q, r = np.linalg.qr(N)
            N = q[:, np.abs(np.diag(r)) > 1e-9]
        elif N.shape[1]:
            N = N / np.maximum(np.linalg.norm(N, axis=0), 1e-300)
    signs = np.where(x >= 0, 1, -1)
    return SignedColoring(signs)


# ---------------------------------------------------------------- Lovett-Meka


def default_step_size(n):
    return 1.0 / (8.0 * math.sqrt(max(n, 1)))


def _partial_coloring_walk(A, budgets, x0, rng, step_size, max_time, stick_tol, scale_n=None):
    n = A.shape[1]
    scale = math.sqrt(n if scale_n is None else scale_n)
    b = np.asarray(budgets, dtype=float) * scale
    return sticky_walk(DenseRows(A), -b, b, x0, rng, step_size, max_time, stick_tol=stick_tol)


def lovett_meka_partial_coloring(A, x0, rng_seed, step_size=None, max_time=1.0, stick_tol=None):
    """One partial-coloring round.

    Returns ``x`` with ``|<x - x0, a_j>| <= c_j sqrt(n)`` for every row and at
    least ``n/4`` coordinates at +-1. Raises ``RetryableFailure`` when the walk
    ends with too few frozen coordinates.
    """
    if isinstance(x0, PartialColoring):
        x0v = x0.values
    else:
        x0v = np.asarray(x0, dtype=float)
    n = A.n
    if x0v.size != n:
        raise InvalidArgument("x0 has the wrong length")
    if np.any(np.abs(x0v) > 1.0 + FROZEN_TOL):
        raise InvalidArgument("x0 must lie in [-1, 1]^n")
    if A.gate() > LM_GATE * (1 + 1e-12):
        raise InvalidArgument(f"budget condition violated: sum exp(-c^2/16) = {A.gate():.4g} > 1/16")
    step = default_step_size(n) if step_size is None else float(step_size)
    if step <= 0 or max_time <= 0:
        raise InvalidArgument("step_size and max_time must be positive")
    tol = step / 4.0 if stick_tol is None else stick_tol
    rng = np.random.default_rng(rng_seed)
    res = _partial_coloring_walk(A.rows, A.budgets, np.clip(x0v, -1, 1), rng, step, max_time, tol)
    out = PartialColoring.from_values(res.x)
    if len(out.frozen) < n / 4.0:
        raise RetryableFailure(
            f"walk froze {len(out.frozen)} of {n} coordinates (< n/4)",
            report={"frozen_count": len(out.frozen), "n": n, "seed": rng_seed},
        )
    return out


def lm_uniform_budget(m):
    """Smallest uniform budget meeting the gate: ``m * exp(-c^2/16) = 1/16``."""
    return 4.0 * math.sqrt(math.log(16.0 * max(m, 1)))


# ---------------------------------------------------------------- Spencer


@dataclass(frozen=True)
class SpencerConfig:
    K_impl: float = 15.0
    wall: float = 1.2          # starting absolute wall, in units of sqrt(n)
    relax: float = 1.05        # wall growth when a round freezes < n_r/4
    step_scale: float = 4.0    # step = 1 / (step_scale * sqrt(n_r))
    max_time: float = 2.0
    max_rounds: int = 200
    exhaustive_stragglers: int = 12


@dataclass
class SpencerResult:
    coloring: SignedColoring
    bound_achieved: float
    ratio: float
    rounds: int
    frozen_per_round: list
    stragglers: int
    straggler_error: float
    final_wall: float
    seed: int

    def to_dict(self):
        return {
            "bound_achieved": self.bound_achieved,
            "ratio": self.ratio,
            "rounds": self.rounds,
            "frozen_per_round": list(self.frozen_per_round),
            "frozen_count": int(self.coloring.n - self.stragglers),
            "stragglers": self.stragglers,
            "straggler_error": self.straggler_error,
            "final_wall": self.final_wall,
            "seed": self.seed,
        }


def iterated_coloring(A, rng, config=SpencerConfig()):
    """Iterate partial-coloring rounds on the live coordinates, then round stragglers.

    Each round's walls are absolute: ``|<x, a_j>| <= wall * sqrt(n)``, i.e. the
    per-row budget relative to the round's start point is
    ``wall*sqrt(n) - |<x0, a_j>|``. Returns ``(x, info)``.
    """
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    x = np.zeros(n)
    live = np.ones(n, dtype=bool)
    wall = config.wall
    frozen_per_round = []
    target = max(1.0, math.log2(n)) if n > 1 else 0.0
    rounds = 0
    while live.sum() > target and rounds < config.max_rounds:
        idx = np.flatnonzero(live)
        nr = idx.size
        cur = A @ x
        budgets = np.maximum(wall * math.sqrt(n) - np.abs(cur), 0.0)
        step = 1.0 / (config.step_scale * math.sqrt(nr))
        res = _partial_coloring_walk(A[:, idx], budgets, x[idx], rng, step,
                                     config.max_time, step / 4.0, scale_n=1)
        x[idx] = res.x
        newly = int(res.frozen.sum())
        live[idx[res.frozen]] = False
        frozen_per_round.append(newly)
        rounds += 1
        if newly < nr / 4.0:
            wall *= config.relax
    strag = np.flatnonzero(live)
    before = A @ np.where(live, 0.0, x)
    frac = A[:, strag] @ x[strag]
    if 0 < strag.size <= config.exhaustive_stragglers:
        best = None
        for signs in itertools.product((1.0, -1.0), repeat=strag.size):
            val = np.abs(before + A[:, strag] @ np.array(signs)).max() if m else 0.0
            if best is None or val < best[0]:
                best = (val, signs)
        x[strag] = best[1]
    else:
        x[strag] = np.where(x[strag] >= 0, 1.0, -1.0)
    err = float(np.abs(A[:, strag] @ x[strag] - frac).max()) if (m and strag.size) else 0.0
    x = np.where(x >= 0, 1.0, -1.0)
    info = dict(rounds=rounds, frozen_per_round=frozen_per_round, stragglers=int(strag.size),
                straggler_error=err, final_wall=wall)
    return x, info


def spencer_coloring(A, rng_seed, config=SpencerConfig()):
    if not A.spencer_normalized:
        raise InvalidArgument("spencer_coloring expects entries bounded by 1")
    if A.m > 2 * A.n:
        raise InvalidArgument("spencer_coloring expects m <= 2n")
    rng = np.random.default_rng(rng_seed)
    x, info = iterated_coloring(A.rows, rng, config)
    bound = float(np.abs(A.rows @ x).max()) if A.m else 0.0
    ratio = bound / math.sqrt(A.n)
    if ratio > config.K_impl:
        raise RetryableFailure(f"achieved {ratio:.3g} sqrt(n) > K_impl = {config.K_impl}",
                               report={"bound_achieved": bound, "seed": rng_seed})
    return SpencerResult(SignedColoring(x.astype(np.int64)), bound, ratio, seed=rng_seed, **info)


# ---------------------------------------------------------------- pigeonhole oracle

ORACLE_MAX_N = 20
EXACT_STATE_CAP = 4_000_000


def _all_binary(n):
    codes = np.arange(1 << n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8), codes


def _bucket_search(A, bound, need):
    m, n = A.shape
    Y, codes = _all_binary(n)
    AY = Y @ A.T if m else np.zeros((Y.shape[0], 0))
    if bound > 0:
        # floor buckets of width `bound`: same cell => every coordinate differs by < bound
        keys = np.floor(AY / bound).astype(np.int64)
    else:
        keys = np.round(AY * 1e9).astype(np.int64)
    if m == 0:
        inv = np.zeros(Y.shape[0], dtype=np.int64)
    else:
        _, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable")
    sorted_inv = inv[order]
    starts = np.flatnonzero(np.r_[True, sorted_inv[1:] != sorted_inv[:-1]])
    ends = np.r_[starts[1:], order.size]
    pop = np.array([bin(i).count("1") for i in range(1 << min(n, 16))], dtype=np.int64)

    def popcount(v):
        out = pop[v & 0xFFFF]
        if n > 16:
            out = out + pop[(v >> 16) & 0xFFFF]
        return out

    for s, e in zip(starts, ends):
        if e - s < 2:
            continue
        members = codes[order[s:e]]
        for anchor in members[:64]:
            dist = popcount(members ^ anchor)
            j = int(np.argmax(dist))
            if dist[j] >= need:
                y = Y[anchor].astype(np.int64)
                yp = Y[members[j]].astype(np.int64)
                x = y - yp
                if m == 0 or np.abs(A @ x).max() <= bound * (1 + 1e-12) + 1e-12:
                    return x
    return None


def _exact_search(A, bound, need):
    """Level-by-level search over {-1,0,1}^n with pruning and state merging."""
    m, n = A.shape
    tol = 1e-9 * max(1.0, bound)
    absA = np.abs(A)
    remaining = np.concatenate([np.cumsum(absA[:, ::-1], axis=1)[:, ::-1], np.zeros((m, 1))], axis=1)
    sums = np.zeros((1, m))
    nnz = np.zeros(1, dtype=np.int64)
    started = np.zeros(1, dtype=bool)
    xs = np.zeros((1, n), dtype=np.int8)
    for k in range(n):
        cand_s, cand_z, cand_st, cand_x = [], [], [], []
        for val in (0, 1, -1):
            if val == -1:
                mask = started
            else:
                mask = np.ones(sums.shape[0], dtype=bool)
            if not mask.any():
                continue
            s = sums[mask] + val * A[:, k]
            z = nnz[mask] + (val != 0)
            st = started[mask] | (val != 0)
            xx = xs[mask].copy()
            xx[:, k] = val
            cand_s.append(s)
            cand_z.append(z)
            cand_st.append(st)
            cand_x.append(xx)
        sums = np.concatenate(cand_s)
        nnz = np.concatenate(cand_z)
        started = np.concatenate(cand_st)
        xs = np.concatenate(cand_x)
        ok = nnz + (n - k - 1) >= need
        if m:
            ok &= np.all(np.abs(sums) <= bound + remaining[:, k + 1] + tol, axis=1)
        sums, nnz, started, xs = sums[ok], nnz[ok], started[ok], xs[ok]
        if sums.shape[0] == 0:
            return None
        key = np.column_stack([np.round(sums / 1e-9).astype(np.int64) if m else np.zeros((sums.shape[0], 0), np.int64),
                               np.minimum(nnz, need), started.astype(np.int64)])
        _, first = np.unique(key, axis=0, return_index=True)
        first.sort()
        sums, nnz, started, xs = sums[first], nnz[first], started[first], xs[first]
        if sums.shape[0] > EXACT_STATE_CAP:
            raise SizeLimitError("exact partial-coloring search exceeded its state budget")
    good = nnz >= need
    if m:
        good &= np.all(np.abs(sums) <= bound + tol, axis=1)
    hits = np.flatnonzero(good)
    if hits.size == 0:
        return None
    return xs[hits[0]].astype(np.int64)


def exhaustive_partial_coloring_oracle(A, bound):
    """Find ``x in {-1,0,1}^n`` with at least ``n/4`` non-zeros and ``||Ax||_inf <= bound``.

    Pigeonhole step: bucket all ``Ay``, ``y in {0,1}^n``, and difference a pair
    from one bucket. If no bucket yields a pair, an exact pruned search over
    ``{-1,0,1}^n`` decides; ``None`` means no such vector exists.
    """
    M = A.rows if isinstance(A, ConstraintSystem) else np.atleast_2d(np.asarray(A, dtype=float))
    m, n = M.shape
    if n > ORACLE_MAX_N:
        raise SizeLimitError(f"oracle enumerates 2^n vectors; n = {n} > {ORACLE_MAX_N}")
    if bound < 0:
        raise InvalidArgument("bound must be non-negative")
    need = math.ceil(n / 4.0)
    x = _bucket_search(M, bound, need)
    if x is None:
        x = _exact_search(M, bound, need)
    if x is None:
        return None
    return PartialColoring.from_values(x.astype(float))


# ---------------------------------------------------------------- file formats


def read_matrix_market(source, budgets=None):
    """ConstraintSystem from Matrix Market text or a path (coordinate or array format)."""
    if isinstance(source, str) and source.lstrip().startswith("%%MatrixMarket"):
        source = io.BytesIO(source.encode())
    M = scipy.io.mmread(source)
    M = M.toarray() if hasattr(M, "toarray") else np.asarray(M)
    return ConstraintSystem.from_matrix(M, budgets)


def write_matrix_market(A):
    buf = io.BytesIO()
    rows = A.rows if isinstance(A, ConstraintSystem) else np.asarray(A)
    scipy.io.mmwrite(buf, scipy.sparse.coo_matrix(rows))
    return buf.getvalue().decode()


def read_hypergraph(text, n=None):
    """One edge per line, whitespace-separated 1-based vertex ids; ``#`` starts a comment."""
    edges = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            edges.append([int(t) - 1 for t in line.split()])
    if n is None:
        n = 1 + max((max(e) for e in edges if e), default=-1)
    if any(v < 0 for e in edges for v in e):
        raise InvalidArgument("vertex ids are 1-based")
    return Hypergraph(n, tuple(edges))


def write_hypergraph(H):
    return "".join(" ".join(str(v + 1) for v in sorted(e)) + "\n" for e in H.edges)
