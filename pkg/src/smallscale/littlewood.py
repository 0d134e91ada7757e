"""Flat Littlewood polynomials.

The degree-4n polynomial is written in centered form

    f(x) = eps_0 + 2 sum_{k in C} eps_k cos kx + 2i sum_{k in S} eps_k sin kx,

so that |P(e^{ix})| = |f(x)|. The cosine part comes from a twisted
Rudin-Shapiro pair; the sine part is chosen by a constrained random walk so
that it is large wherever the cosine part is small.

Bad intervals live on the half circle [0, pi] in the pipeline: c is even and
s is odd, so the arc -I is bad exactly when I is, and |s| takes the same values
on both. Treating I and -I as separate variables would be wrong (they cannot
be pushed in the same direction), so only one representative is kept.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize
import scipy.sparse

from .discrepancy import SpencerConfig, iterated_coloring
from .errors import (InvalidArgument, PipelineFailure, RetryableFailure,
                     SizeLimitError, ValidationFailure)
from .walk import SineGridRows, StackedRows, sticky_walk

RS_MAX_LEVEL = 24
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class LittlewoodConfig:
    K1: float = 4.0              # bad-interval count <= K1 * gamma * n
    K2: float = 64.0             # interval length <= K2 / n
    K3: float = 1.0 / 64.0       # gap between intervals >= K3 / n
    detect_multiplier: int = 16  # detection grid has detect_multiplier * n points
    half_circle: bool = True
    c1_target: float = 0.02      # flatness targets, in units of sqrt(4n)
    c2_target: float = 10.0
    flat_grid_multiplier: int = 64
    delta_floor: float = 0.025   # effective delta is max(delta, delta_floor)
    C_push: float = 3.0
    c2_sine: float = 6.0         # |s| <= c2_sine * sqrt(n)
    wall_level: float = 0.8      # interval walls start at wall_level * sqrt(n) and relax toward delta
    repair_margin: float = 1.2   # local repair aims at repair_margin * delta * sqrt(n)
    wall_multiplier: int = 16    # wall grid density on bad intervals
    relax: float = 0.85          # wall factor after a round that freezes < 1/4 of the live signs
    step: float = 0.1
    max_time: float = 4.0
    max_rounds: int = 60
    retries: int = 10


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class RudinShapiroPair:
    p: np.ndarray
    q: np.ndarray
    level: int

    def check_identity(self, grid_points=4096):
        """Largest relative deviation of |P|^2 + |Q|^2 from 2^(t+1) on a grid."""
        N = max(grid_points, self.p.size)
        P = np.fft.fft(self.p, N)
        Q = np.fft.fft(self.q, N)
        target = 2.0 ** (self.level + 1)
        return float(np.max(np.abs(np.abs(P) ** 2 + np.abs(Q) ** 2 - target)) / target)


@dataclass(frozen=True)
class CosinePart:
    """c(x) = sum_{k in C} eps_k cos kx with C = [T, 3T - 1]."""

    n: int
    gamma: float
    t: int
    T: int
    freqs: np.ndarray
    coeffs: np.ndarray
    offset: float = 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        out = np.empty(flat.size)
        for s in range(0, flat.size, 4096):
            out[s:s + 4096] = np.cos(np.outer(flat[s:s + 4096], self.freqs)) @ self.coeffs
        return (out + self.offset).reshape(x.shape)

    def on_grid(self, N):
        if N <= self.freqs.max():
            return self(TWO_PI * np.arange(N) / N)
        c = np.zeros(N)
        c[self.freqs] = self.coeffs
        return np.fft.fft(c).real + self.offset

    def shifted(self, offset):
        return CosinePart(self.n, self.gamma, self.t, self.T, self.freqs, self.coeffs, offset)


@dataclass(frozen=True)
class BadIntervalSet:
    """Disjoint arcs ``(a, b)`` with ``a < b`` (``b`` may pass 2*pi for a wrapping arc)."""

    intervals: tuple
    delta: float
    n: int
    gamma: float | None = None
    half_circle: bool = False
    stats: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.intervals)

    @property
    def starts(self):
        return np.array([a for a, _ in self.intervals], dtype=float)

    @property
    def ends(self):
        return np.array([b for _, b in self.intervals], dtype=float)

    def grid_membership(self, N):
        """Indices of the ``N``-grid lying in some interval, and which interval."""
        xs = TWO_PI * np.arange(N) / N
        pts, owner = [], []
        for j, (a, b) in enumerate(self.intervals):
            lo = math.ceil(a * N / TWO_PI - 1e-12)
            hi = math.floor(b * N / TWO_PI + 1e-12)
            g = np.arange(lo, hi + 1) % N
            pts.append(g)
            owner.append(np.full(g.size, j))
        if not pts:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        pts = np.concatenate(pts)
        owner = np.concatenate(owner)
        del xs
        return pts, owner


@dataclass
class PushPlan:
    alphas: np.ndarray
    deltas: np.ndarray
    bias: np.ndarray
    S: np.ndarray
    C_push: float
    gamma: float
    n: int
    max_delta: float
    seed: int | None = None

    @property
    def bound(self):
        return self.C_push * math.sqrt(self.gamma * self.n)


@dataclass
class LittlewoodPoly:
    """Degree-4n polynomial with coefficients ``a_j = eps_{j - 2n}``."""

    coeffs: np.ndarray
    C: np.ndarray
    S: np.ndarray
    gamma: float
    n: int
    meta: dict = field(default_factory=dict)

    def eps(self, k):
        return int(self.coeffs[k + 2 * self.n])

    def f(self, x):
        """Centered value sum_k eps_k e^{ikx} at angles ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        ks = np.arange(-2 * self.n, 2 * self.n + 1)
        out = np.empty(x.size, dtype=complex)
        for s in range(0, x.size, 1024):
            out[s:s + 1024] = np.exp(1j * np.outer(x[s:s + 1024], ks)) @ self.coeffs
        return out

    def check(self):
        """Return the list of violated invariants (empty when all hold)."""
        bad = []
        a = self.coeffs
        n = self.n
        if a.size != 4 * n + 1 or not np.all(np.abs(a) == 1):
            bad.append("coefficients must be 4n+1 values in {-1, +1}")
        for k in self.C:
            if a[2 * n + k] != a[2 * n - k]:
                bad.append(f"cosine symmetry fails at k={k}")
                break
        for k in self.S:
            if a[2 * n + k] != -a[2 * n - k]:
                bad.append(f"sine antisymmetry fails at k={k}")
                break
        ks = np.sort(np.concatenate([self.C, self.S]))
        if not np.array_equal(ks, np.arange(1, 2 * n + 1)):
            bad.append("C and S must partition [1, 2n]")
        N = 8 * (4 * n + 1)
        mean = float(np.mean(np.abs(np.fft.fft(a.astype(float), N)) ** 2))
        if abs(mean - (4 * n + 1)) > 1e-6 * (4 * n + 1):
            bad.append("Parseval check failed")
        return bad

    def to_dict(self):
        return {"n": self.n, "gamma": self.gamma, "delta": self.meta.get("delta"),
                "seed": self.meta.get("seed"), "coeffs": [int(c) for c in self.coeffs]}

    def to_text(self):
        return "".join(f"{int(c)}\n" for c in self.coeffs)


# ---------------------------------------------------------------- evaluation


def rudin_shapiro(t):
    if t < 0:
        raise InvalidArgument("level t must be non-negative")
    if t > RS_MAX_LEVEL:
        raise SizeLimitError(f"level {t} exceeds {RS_MAX_LEVEL}")
    p = np.ones(1, dtype=np.int8)
    q = np.ones(1, dtype=np.int8)
    for _ in range(t):
        p, q = np.concatenate([p, q]), np.concatenate([p, -q])
    return RudinShapiroPair(p, q, t)


def evaluate_on_circle(coeffs, grid_points):
    """P(e^{2 pi i j / N}) for j < N by Horner's rule on the grid of roots of unity.

    Only the N grid phases are computed with exp; each coefficient costs one
    complex multiply-add per grid point.
    """
    a = np.asarray(coeffs)
    if a.size == 0:
        raise InvalidArgument("empty coefficient sequence")
    N = int(grid_points)
    if N < a.size:
        raise InvalidArgument("grid_points must be at least degree + 1")
    z = np.exp(2j * np.pi * np.arange(N) / N)
    out = np.zeros(N, dtype=complex)
    for c in a[::-1]:
        out *= z
        out += c
    return out


def _grid_abs(coeffs, N):
    return np.abs(np.fft.ifft(np.asarray(coeffs, dtype=complex), N) * N)


def flatness_report(P, grid_multiplier=64):
    """Grid extrema of |P| on ``grid_multiplier * degree`` points (rounded up to a multiple of 4)."""
    coeffs = P.coeffs if isinstance(P, LittlewoodPoly) else np.asarray(P)
    deg = max(coeffs.size - 1, 1)
    N = grid_multiplier * deg
    N += (-N) % 4
    N = max(N, coeffs.size)
    v = _grid_abs(coeffs, N)
    i_min = int(np.argmin(v))
    i_max = int(np.argmax(v))
    lo = float(v[i_min])
    hi = float(v[i_max])
    return {
        "min_abs": lo,
        "max_abs": hi,
        "ratio": hi / lo if lo > 0 else None,
        "argmin": TWO_PI * i_min / N,
        "argmax": TWO_PI * i_max / N,
        "grid_points": N,
    }


# ---------------------------------------------------------------- cosine part


def build_cosine_part(n, gamma):
    if not 0 < gamma <= 0.125:
        raise InvalidArgument("gamma must lie in (0, 1/8]")
    if gamma * n < 8:
        raise InvalidArgument("need gamma * n >= 8")
    t = int(math.floor(math.log2(gamma * n) + 1e-12))
    T = 1 << t
    rs = rudin_shapiro(t)
    freqs = np.arange(T, 3 * T)
    coeffs = np.concatenate([rs.p, rs.q]).astype(float)
    return CosinePart(n, gamma, t, T, freqs, coeffs)


# ---------------------------------------------------------------- bad intervals


def _runs(mask, circular):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return []
    cuts = np.flatnonzero(np.diff(idx) > 1) + 1
    runs = [[int(r[0]), int(r[-1])] for r in np.split(idx, cuts)]
    N = mask.size
    if circular and len(runs) > 1 and runs[0][0] == 0 and runs[-1][1] == N - 1:
        runs[0][0] = runs[-1][0] - N
        runs.pop()
    return runs


def detect_bad_intervals(c, n, delta, grid_multiplier=16, gamma=None, half_circle=False,
                         config=LittlewoodConfig()):
    """Arcs where ``|c(x)| < delta * sqrt(n)``, widened by one grid cell each side.

    ``c`` is a callable (vectorized over angles) or a ``CosinePart``. With
    ``half_circle`` only [0, pi] is scanned. Raises ``ValidationFailure`` with
    the stats when a condition fails; ``gamma=None`` skips the count condition.
    """
    if delta <= 0:
        raise InvalidArgument("delta must be positive")
    N = int(grid_multiplier) * int(n)
    h = TWO_PI / N
    if isinstance(c, CosinePart):
        vals = c.on_grid(N)
    else:
        vals = np.asarray(c(TWO_PI * np.arange(N) / N), dtype=float)
    low = np.abs(vals) < delta * math.sqrt(n)
    if half_circle:
        low = low[: N // 2 + 1]
    whole = (not half_circle) and bool(low.all())
    if whole:
        arcs = [(0.0, TWO_PI)]
    else:
        arcs = []
        for i, j in _runs(low, circular=not half_circle):
            a = max((i - 1) * h, 0.0) if half_circle else (i - 1) * h
            b = min((j + 1) * h, math.pi) if half_circle else (j + 1) * h
            if arcs and a - arcs[-1][1] < h:
                arcs[-1] = (arcs[-1][0], max(arcs[-1][1], b))
            else:
                arcs.append((a, b))
        if not half_circle and len(arcs) > 1 and arcs[0][0] + TWO_PI - arcs[-1][1] < h:
            first = arcs.pop(0)
            arcs[-1] = (arcs[-1][0], first[1] + TWO_PI)
        arcs = [(a % TWO_PI, a % TWO_PI + (b - a)) for a, b in arcs]
        arcs.sort()
    lengths = [b - a for a, b in arcs]
    if len(arcs) > 1:
        gaps = [arcs[i + 1][0] - arcs[i][1] for i in range(len(arcs) - 1)]
        if not half_circle:
            gaps.append(arcs[0][0] + TWO_PI - arcs[-1][1])
    else:
        gaps = []
    conditions = {
        "count": None if gamma is None else len(arcs) <= config.K1 * gamma * n,
        "length": all(L <= config.K2 / n for L in lengths),
        "gap": all(g >= config.K3 / n for g in gaps),
    }
    if half_circle:
        # s vanishes at 0 and pi, so a bad arc touching either cannot be repaired
        conditions["avoids_0_pi"] = not any(a <= 0.0 or b >= math.pi for a, b in arcs)
    stats = {
        "count": len(arcs),
        "max_length": max(lengths) if lengths else 0.0,
        "min_gap": min(gaps) if gaps else None,
        "grid_points": N,
        "conditions": conditions,
    }
    out = BadIntervalSet(tuple(arcs), float(delta), int(n), gamma, half_circle, stats)
    if any(v is False for v in conditions.values()):
        failed = [k for k, v in conditions.items() if v is False]
        raise ValidationFailure(f"bad-interval conditions failed: {', '.join(failed)}", stats=stats)
    return out


# ---------------------------------------------------------------- push plan


def _interval_arrays(intervals):
    if isinstance(intervals, BadIntervalSet):
        return intervals.starts, intervals.ends
    arr = np.asarray(list(intervals), dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def push_matrix(intervals, S):
    """M[k, I] = (1/|I|) int_I sin(ks) ds, in closed form."""
    a, b = _interval_arrays(intervals)
    k = np.asarray(S, dtype=float)[:, None]
    return (np.cos(k * a[None, :]) - np.cos(k * b[None, :])) / (k * (b - a)[None, :])


def compute_push_deltas(intervals, alphas, S):
    a, _ = _interval_arrays(intervals)
    alphas = np.asarray([alphas[i] for i in range(len(a))] if isinstance(alphas, dict) else alphas,
                        dtype=float)
    if alphas.size != a.size:
        raise InvalidArgument("one alpha per interval is required")
    return push_matrix(intervals, S) @ alphas


def choose_interval_signs(intervals, S, rng_seed, gamma=None, n=None, config=LittlewoodConfig()):
    """Pick interval directions with small push coefficients via iterated coloring."""
    gamma = intervals.gamma if gamma is None else gamma
    n = intervals.n if n is None else n
    if len(intervals) < 1:
        raise InvalidArgument("need at least one interval")
    S = np.asarray(S, dtype=np.int64)
    M = push_matrix(intervals, S)
    bound = config.C_push * math.sqrt(gamma * n)
    ss = np.random.SeedSequence(rng_seed)
    best = None
    for child in ss.spawn(config.retries):
        alphas, _ = iterated_coloring(M, np.random.default_rng(child), SpencerConfig())
        deltas = M @ alphas
        worst = float(np.abs(deltas).max())
        if best is None or worst < best[0]:
            best = (worst, alphas, deltas)
        if worst <= bound:
            break
    worst, alphas, deltas = best
    if worst > bound:
        raise ValidationFailure(f"max |Delta(k)| = {worst:.4g} exceeds {bound:.4g}",
                                stats={"max_delta": worst, "bound": bound})
    bias = np.clip(deltas / bound, -1.0, 1.0)
    return PushPlan(alphas.astype(np.int64), deltas, bias, S, config.C_push, gamma, n, worst, rng_seed)


# ---------------------------------------------------------------- sine part


def _pow2_at_least(x):
    return 1 << max(0, math.ceil(math.log2(x)))


def _sine_values(S, eps, N):
    c = np.zeros(N, dtype=complex)
    c[S] = eps
    return np.fft.ifft(c).imag * N


def _wall_rows(plan, intervals, S, n, config):
    n_wall = _pow2_at_least(max(config.wall_multiplier * n, 2 * S.max() + 2))
    pts, owner = intervals.grid_membership(n_wall)
    signs = plan.alphas[owner].astype(float) if pts.size else np.zeros(0)
    lower_rows = SineGridRows(S, n_wall, pts, signs)
    # rigorous grid rule: |s| <= M_grid / (1 - 2 pi n / N) and N >= 8 pi n keeps the slack <= 1/4
    n_up = _pow2_at_least(max(8 * math.pi * n, 2 * S.max() + 2))
    upper_rows = SineGridRows(S, n_up)
    return lower_rows, upper_rows


def _violations(eps, intervals, n, config, lower_rows, upper_rows):
    root = math.sqrt(n)
    tau = config.repair_margin * intervals.delta * root
    lo = lower_rows.apply(eps) if len(lower_rows) else np.zeros(0)
    up = upper_rows.apply(eps)
    under = np.maximum(tau - lo, 0.0)
    over = np.maximum(np.abs(up) - 0.75 * config.c2_sine * root, 0.0)
    return under, over


def _repair(eps, intervals, S, n, config, lower_rows, upper_rows, max_iter=400):
    """Best-single-flip local search on the hinge violation of the grid walls.

    Every flip is scored exactly on the interval walls and on the upper-grid
    points currently above half the cap. Returns ``(eps, success)``.
    """
    root = math.sqrt(n)
    tau = config.repair_margin * intervals.delta * root
    cap = 0.75 * config.c2_sine * root
    L = np.stack([lower_rows.row(j) for j in range(len(lower_rows))]) if len(lower_rows) \
        else np.zeros((0, S.size))
    eps = eps.astype(float).copy()
    for _ in range(max_iter):
        lo = L @ eps
        up = upper_rows.apply(eps)
        hot = np.flatnonzero(np.abs(up) > 0.5 * cap)
        U = np.stack([upper_rows.row(j) for j in hot]) if hot.size else np.zeros((0, S.size))
        cur = np.maximum(tau - lo, 0.0).sum() + np.maximum(np.abs(up[hot]) - cap, 0.0).sum()
        if cur == 0.0:
            return eps, True
        # value after flipping k: v - 2 eps_k row_k
        lo_new = lo[:, None] - 2.0 * L * eps[None, :]
        up_new = up[hot][:, None] - 2.0 * U * eps[None, :]
        score = np.maximum(tau - lo_new, 0.0).sum(axis=0) + \
            np.maximum(np.abs(up_new) - cap, 0.0).sum(axis=0)
        k = int(np.argmin(score))
        if score[k] >= cur:
            return eps, False
        eps[k] = -eps[k]
    return eps, False


def _feasible_start(bias, lower_rows, tau):
    """Closest point to ``bias`` (in l1) in the cube with every interval wall above ``tau``.

    The bias only guarantees the walls on average over each arc, so a few grid
    points can start below target; the walk would then hold them there.
    """
    if len(lower_rows) == 0:
        return bias
    L = np.stack([lower_rows.row(j) for j in range(len(lower_rows))])
    if np.all(L @ bias >= tau):
        return bias
    m = bias.size
    # variables (x, d) with |x - bias| <= d; minimize sum d
    cost = np.concatenate([np.zeros(m), np.ones(m)])
    eye = scipy.sparse.identity(m, format="csr")
    A_ub = scipy.sparse.vstack([
        scipy.sparse.hstack([scipy.sparse.csr_matrix(-L), scipy.sparse.csr_matrix((L.shape[0], m))]),
        scipy.sparse.hstack([eye, -eye]),
        scipy.sparse.hstack([-eye, -eye]),
    ]).tocsr()
    b_ub = np.concatenate([np.full(L.shape[0], -tau), bias, -bias])
    bounds = [(-1.0, 1.0)] * m + [(0.0, None)] * m
    res = scipy.optimize.linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        return None
    return np.clip(res.x[:m], -1.0, 1.0)


def validate_sine_part(eps, intervals, S, n, c2, grid_multiplier=128):
    """Independent check of (a) |s| <= c2 sqrt(n) and (b) |s| >= delta sqrt(n) on bad arcs."""
    N = max(grid_multiplier * n, 2 * int(np.max(S)) + 2)
    s = _sine_values(np.asarray(S), np.asarray(eps, dtype=float), N)
    root = math.sqrt(n)
    pts, _ = intervals.grid_membership(N)
    upper_ok = float(np.abs(s).max()) <= c2 * root
    lower_min = float(np.abs(s[pts]).min()) if pts.size else math.inf
    return {
        "max_abs_s": float(np.abs(s).max()) / root,
        "min_abs_s_on_bad": lower_min / root if pts.size else None,
        "upper_ok": upper_ok,
        "lower_ok": lower_min >= intervals.delta * root,
        "grid_points": N,
    }


def build_sine_part(plan, intervals, S, n, rng_seed, config=LittlewoodConfig()):
    """Signs on ``S`` with |s| large on the bad arcs and bounded everywhere.

    Starts near the bias of ``plan`` and runs partial-coloring walks whose walls
    are ``alpha_I s(x_g) >= tau`` at grid points inside the arcs plus
    ``|s(x_g)| <= 0.75 c2 sqrt(n)`` on a grid with at least 8 pi n points.
    ``tau`` starts at ``wall_level * sqrt(n)``, well above the target, because
    the walk stalls with a few hundred live signs pinned by tight walls and
    rounding those moves s by a sizable fraction of sqrt(n). Stalled rounds lower
    ``tau`` toward ``delta * sqrt(n)``. Stragglers are rounded and repaired by
    local search, and the result is revalidated on a fresh grid.
    """
    S = np.asarray(S, dtype=np.int64)
    rng = np.random.default_rng(rng_seed)
    root = math.sqrt(n)
    lower_rows, upper_rows = _wall_rows(plan, intervals, S, n, config)
    tau = max(config.wall_level, intervals.delta) * root
    x = _feasible_start(np.clip(np.asarray(plan.bias, dtype=float), -1.0, 1.0), lower_rows, 1.2 * tau)
    if x is None:
        raise RetryableFailure("no start point satisfies the interval walls", report={"stage": "start"})
    x = x.copy()
    live = np.abs(x) < 1.0 - 1e-12
    cap = 0.75 * config.c2_sine * root
    target = max(1.0, math.log2(S.size))
    rounds = 0
    while live.sum() > target and rounds < config.max_rounds:
        idx = np.flatnonzero(live)
        sub_lo = SineGridRows(S[idx], lower_rows.N, lower_rows.points, lower_rows.signs)
        sub_up = SineGridRows(S[idx], upper_rows.N)
        cur_lo = lower_rows.apply(x) if len(lower_rows) else np.zeros(0)
        cur_up = upper_rows.apply(x)
        lower = np.concatenate([np.minimum(tau - cur_lo, 0.0), np.minimum(-cap - cur_up, 0.0)])
        upper = np.concatenate([np.full(len(sub_lo), np.inf), np.maximum(cap - cur_up, 0.0)])
        res = sticky_walk(StackedRows(sub_lo, sub_up), lower, upper, x[idx], rng, config.step,
                          config.max_time, stick_tol=config.step / 4.0)
        x[idx] = res.x
        newly = res.frozen & (np.abs(x[idx]) >= 1.0)
        live[idx[newly]] = False
        rounds += 1
        if newly.sum() < idx.size / 4.0:
            # tight walls would stick again at once; give them room, down to the target
            if tau <= intervals.delta * root:
                break
            tau = max(tau * config.relax, intervals.delta * root)
            cap /= config.relax
    strag = np.flatnonzero(live)
    frac_lo = lower_rows.apply(x) if len(lower_rows) else np.zeros(1)
    walk_min = float(frac_lo.min()) / root
    eps = np.where(x >= 0, 1.0, -1.0)
    if 0 < strag.size <= 12:
        best = None
        for signs in itertools.product((1.0, -1.0), repeat=strag.size):
            eps[strag] = signs
            under, over = _violations(eps, intervals, n, config, lower_rows, upper_rows)
            score = under.sum() + over.sum()
            if best is None or score < best[0]:
                best = (score, signs)
        eps[strag] = best[1]
    eps, repaired = _repair(eps, intervals, S, n, config, lower_rows, upper_rows)
    report = validate_sine_part(eps, intervals, S, n, config.c2_sine)
    report.update(rounds=rounds, stragglers=int(live.sum()), repaired=repaired,
                  walk_min=walk_min, final_tau=tau / root)
    if not (report["upper_ok"] and report["lower_ok"]):
        raise RetryableFailure("sine part failed validation", report=report)
    return eps.astype(np.int64), report


# ---------------------------------------------------------------- pipeline


def _assemble(n, cos_part, S, eps_s):
    coeffs = np.zeros(4 * n + 1, dtype=np.int64)
    mid = 2 * n
    coeffs[mid] = 1
    coeffs[mid + cos_part.freqs] = cos_part.coeffs.astype(np.int64)
    coeffs[mid - cos_part.freqs] = cos_part.coeffs.astype(np.int64)
    coeffs[mid + S] = eps_s
    coeffs[mid - S] = -eps_s
    return coeffs


def assemble_flat_littlewood(n, gamma=1.0 / 32, delta=None, rng_seed=0, config=LittlewoodConfig()):
    """Full pipeline: cosine part, bad arcs, push plan, sine part, assembly, flatness check."""
    if delta is None:
        delta = gamma / 4.0
    if gamma * n < 8:
        raise InvalidArgument("need gamma * n >= 8")
    diagnostics = {"stages": []}
    cos_part = build_cosine_part(n, gamma)
    c_eff = cos_part.shifted(0.5)          # eps_0 / 2 with eps_0 = +1
    delta_eff = max(delta, config.delta_floor)
    try:
        bad = detect_bad_intervals(c_eff, n, delta_eff, config.detect_multiplier, gamma=gamma,
                                   half_circle=config.half_circle, config=config)
    except ValidationFailure as exc:
        raise PipelineFailure("bad-interval detection failed",
                              diagnostics={"stage": "intervals", "stats": exc.stats}) from exc
    in_c = np.zeros(2 * n + 1, dtype=bool)
    in_c[cos_part.freqs] = True
    S = np.flatnonzero(~in_c[1:]) + 1
    children = np.random.SeedSequence(rng_seed).spawn(config.retries)
    for attempt, child in enumerate(children):
        seeds = child.generate_state(2)
        stage = {"attempt": attempt}
        try:
            if len(bad):
                plan = choose_interval_signs(bad, S, int(seeds[0]), config=config)
            else:
                plan = PushPlan(np.zeros(0, dtype=np.int64), np.zeros(S.size), np.zeros(S.size), S,
                                config.C_push, gamma, n, 0.0, int(seeds[0]))
            stage["max_delta"] = plan.max_delta
            eps_s, sine_report = build_sine_part(plan, bad, S, n, int(seeds[1]), config)
            stage["sine"] = sine_report
        except (ValidationFailure, RetryableFailure) as exc:
            stage["error"] = str(exc)
            stage["report"] = getattr(exc, "report", None) or getattr(exc, "stats", None)
            diagnostics["stages"].append(stage)
            continue
        coeffs = _assemble(n, cos_part, S, eps_s)
        poly = LittlewoodPoly(coeffs, cos_part.freqs.copy(), S, gamma, n)
        rep = flatness_report(poly, config.flat_grid_multiplier)
        root = math.sqrt(4 * n)
        stage["flatness"] = rep
        diagnostics["stages"].append(stage)
        if rep["min_abs"] >= config.c1_target * root and rep["max_abs"] <= config.c2_target * root:
            poly.meta = {"delta": delta, "delta_eff": delta_eff, "seed": rng_seed,
                         "attempts": attempt + 1, "T": cos_part.T, "bad_intervals": len(bad),
                         "max_delta": plan.max_delta, "C_push": config.C_push,
                         "interval_stats": bad.stats, "sine": sine_report}
            return poly
    raise PipelineFailure(f"no flat polynomial after {config.retries} attempts", diagnostics=diagnostics)


# ---------------------------------------------------------------- export


def coefficients_json(P):
    return json.dumps(P.to_dict(), sort_keys=True)


def abs_curve(P, points=2048):
    coeffs = P.coeffs if isinstance(P, LittlewoodPoly) else np.asarray(P)
    N = max(points, coeffs.size)
    return TWO_PI * np.arange(N) / N, _grid_abs(coeffs, N)
