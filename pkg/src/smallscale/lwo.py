"""Small-ball probabilities of Rademacher sums and random sign matrix statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import InvalidArgument, SizeLimitError

EXACT_MAX_N = 24


@dataclass
class WeightVector:
    entries: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        if not isinstance(self.entries, np.ndarray) or self.entries.dtype == object:
            raw = list(self.entries)
            self._exact = [Fraction(x) for x in raw]
            self.entries = np.array([float(x) for x in raw])
        else:
            self.entries = np.asarray(self.entries, dtype=float).ravel()
            self._exact = None
        if not np.isfinite(self.entries).all():
            raise InvalidArgument("weights must be finite")
        if self.normalized and abs(np.linalg.norm(self.entries) - 1) > 1e-12:
            raise InvalidArgument("normalized vector must have unit norm")

    @classmethod
    def unit(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v / np.linalg.norm(v), True)

    @property
    def n(self):
        return self.entries.size

    def exact(self):
        """Entries as exact rationals (floats are converted without rounding)."""
        if self._exact is not None:
            return list(self._exact)
        return [Fraction(float(x)) for x in self.entries]


def _as_weights(v):
    return v if isinstance(v, WeightVector) else WeightVector(v)


@dataclass
class SmallBallEstimate:
    value: float
    mode: str
    trials: int | None = None
    stderr: float | None = None
    numerator: int | None = None
    denominator: int | None = None
    b: float | None = None

    def fraction(self):
        return None if self.numerator is None else Fraction(self.numerator, self.denominator)


def _common_scale(values):
    D = 1
    for q in values:
        D = D * q.denominator // math.gcd(D, q.denominator)
    return D


def _subset_sums(ints):
    """All 2^n signed sums sum_i x_i a_i, index bit i set meaning x_i = -1."""
    big = sum(abs(a) for a in ints) >= 2 ** 62
    sums = np.zeros(1, dtype=object if big else np.int64)
    for a in ints:
        sums = np.concatenate([sums + a, sums - a])
    return sums


def _float_sums(v):
    sums = np.zeros(1)
    for a in v:
        sums = np.concatenate([sums + a, sums - a])
    return sums


def _exact_setup(v, extra):
    vals = v.exact()
    extra = [Fraction(e) for e in extra]
    D = _common_scale(vals + extra)
    return _subset_sums([int(q * D) for q in vals]), [int(e * D) for e in extra], D


def rho_small_ball(v, eps, b=0.0, mode="exact", trials=100000, rng_seed=0):
    """P(|<X, v> - b| < eps) for uniform X in {-1, 1}^n, or its maximum over b with ``b="maximize"``.

    Exact mode works in integers after scaling by a common denominator, so the
    strict inequality (and equality at eps = 0) is decided without rounding.
    """
    v = _as_weights(v)
    if eps < 0:
        raise InvalidArgument("eps must be non-negative")
    n = v.n
    maximize = isinstance(b, str)
    if maximize and b != "maximize":
        raise InvalidArgument("b must be a number or 'maximize'")
    if mode == "exact":
        if n > EXACT_MAX_N:
            raise SizeLimitError(f"exact enumeration needs n <= {EXACT_MAX_N}")
        sums, (E, B), D = _exact_setup(v, [eps, 0 if maximize else b])
        total = 2 ** n
        if not maximize:
            diff = sums - B
            hit = (diff == 0) if E == 0 else (np.abs(diff) < E)
            return SmallBallEstimate(int(hit.sum()) / total, "exact", numerator=int(hit.sum()),
                                     denominator=total, b=float(b))
        s = np.sort(sums)
        if E == 0:
            vals, counts = np.unique(s, return_counts=True)
            i = int(np.argmax(counts))
            return SmallBallEstimate(int(counts[i]) / total, "exact", numerator=int(counts[i]),
                                     denominator=total, b=float(Fraction(int(vals[i]), D)))
        # largest number of sums in an open window of length 2 eps
        ends = np.searchsorted(s, s + 2 * E, side="left")
        counts = ends - np.arange(total)
        i = int(np.argmax(counts))
        c = int(counts[i])
        centre = Fraction(int(s[i]) + int(s[i + c - 1]), 2 * D)
        return SmallBallEstimate(c / total, "exact", numerator=c, denominator=total, b=float(centre))
    if mode != "monte-carlo":
        raise InvalidArgument("mode must be 'exact' or 'monte-carlo'")
    rng = np.random.default_rng(rng_seed)
    # sample in the same integer scaling as exact mode when it fits, so ties agree
    q = v.exact()
    extra = [Fraction(eps), Fraction(0 if maximize else b)]
    D = _common_scale(q + extra)
    ints = [int(x * D) for x in q]
    E, B = (int(x * D) for x in extra)
    if sum(abs(a) for a in ints) + abs(B) + 2 * E < 2 ** 62:
        vals = _mc_sums(np.array(ints, dtype=np.int64), trials, rng)
        eps, b = E, B
    else:
        D = 1
        vals = _mc_sums(v.entries, trials, rng)
    if maximize:
        s = np.sort(vals)
        if eps == 0:
            counts = np.searchsorted(s, s, side="right") - np.arange(trials)
        else:
            counts = np.searchsorted(s, s + 2 * eps, side="left") - np.arange(trials)
        i = int(np.argmax(counts))
        p, bb = counts[i] / trials, float((s[i] + s[i + counts[i] - 1]) / 2) / D
    else:
        hit = (vals == b) if eps == 0 else (np.abs(vals - b) < eps)
        p, bb = float(hit.mean()), float(b) / D
    return SmallBallEstimate(float(p), "monte-carlo", trials, math.sqrt(p * (1 - p) / trials), b=bb)


def _mc_sums(v, trials, rng, chunk=1 << 16):
    out = np.empty(trials, dtype=v.dtype)
    for s in range(0, trials, chunk):
        m = min(chunk, trials - s)
        X = rng.integers(0, 2, size=(m, v.size), dtype=np.int8) * 2 - 1
        out[s:s + m] = X.astype(v.dtype) @ v
    return out


def erdos_bound_check(v):
    """Compare the maximal atom of <X, v> with that of the all-ones vector."""
    v = _as_weights(v)
    if (v.entries == 0).any():
        raise InvalidArgument("all coordinates must be non-zero")
    if v.n > EXACT_MAX_N:
        raise SizeLimitError(f"exact enumeration needs n <= {EXACT_MAX_N}")
    rho0 = rho_small_ball(v, 0, "maximize").fraction()
    bound = Fraction(math.comb(v.n, v.n // 2), 2 ** v.n)
    return {"rho0": rho0, "bound": bound, "holds": rho0 <= bound}


def _lattice_distance(y):
    """Distance from y to the nearest non-zero integer point."""
    r = np.rint(y)
    if np.any(r != 0):
        return float(np.linalg.norm(y - r))
    i = int(np.argmax(np.abs(y)))
    rest = float(y @ y - y[i] ** 2)
    return math.sqrt(rest + (1 - abs(y[i])) ** 2)


@dataclass
class LCDResult:
    value: float | None
    exceeds: bool
    threshold: float
    phis: np.ndarray = field(repr=False)
    margins: np.ndarray = field(repr=False)


def lcd(v, alpha, phi_max, grid_step):
    """Least phi > 0 with dist(phi v, Z^n minus 0) <= sqrt(alpha n), searched on a grid then bisected.

    ``margins`` holds distance minus threshold at every grid point for audit.
    """
    v = _as_weights(v)
    if not 0 < alpha < 1:
        raise InvalidArgument("alpha must lie in (0, 1)")
    if phi_max <= 0 or grid_step <= 0:
        raise InvalidArgument("phi_max and grid_step must be positive")
    x = v.entries
    tau = math.sqrt(alpha * v.n)
    phis = np.arange(1, int(math.floor(phi_max / grid_step)) + 1) * grid_step
    margins = np.array([_lattice_distance(p * x) - tau for p in phis])
    hits = np.flatnonzero(margins <= 0)
    if hits.size == 0:
        return LCDResult(None, True, tau, phis, margins)
    k = int(hits[0])
    hi = float(phis[k])
    lo = float(phis[k - 1]) if k else 0.0
    if lo == 0.0 and _lattice_distance(1e-300 * x) <= tau:
        return LCDResult(0.0, False, tau, phis, margins)
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if _lattice_distance(mid * x) <= tau:
            hi = mid
        else:
            lo = mid
    return LCDResult(hi, False, tau, phis, margins)


def rv_bound_audit(v, alpha, eps, trials=100000, rng_seed=0, phi_max=None, grid_step=0.01):
    """Small-ball probability at 0 next to eps and the LCD of v, for plotting p / eps over a family."""
    v = _as_weights(v)
    mode = "exact" if v.n <= EXACT_MAX_N else "monte-carlo"
    est = rho_small_ball(v, eps, 0.0, mode, trials, rng_seed)
    rec = {"probability": est.value, "eps": eps, "mode": mode, "stderr": est.stderr,
           "ratio": est.value / eps if eps > 0 else None}
    if phi_max is not None:
        res = lcd(v, alpha, phi_max, grid_step)
        rec["lcd"] = res.value
        rec["lcd_exceeds"] = res.exceeds
    return rec


def check_orthonormal(W, tol=1e-9):
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.size == 0:
        return W.reshape(0, 0)
    if np.abs(W @ W.T - np.eye(W.shape[0])).max() > tol:
        raise InvalidArgument("W must be orthonormal")
    return W


def joint_small_ball(v, W, eps, beta, mode="exact", trials=100000, rng_seed=0):
    """P(|<X, v>| < eps and |<X, w_i>| < beta for all i), with the e^{-k} normalised ratio."""
    v = _as_weights(v)
    W = check_orthonormal(W) if len(W) else np.empty((0, v.n))
    k = W.shape[0]
    if k and W.shape[1] != v.n:
        raise InvalidArgument("dimension mismatch")
    if mode == "exact":
        if v.n > EXACT_MAX_N:
            raise SizeLimitError(f"exact enumeration needs n <= {EXACT_MAX_N}")
        sums, (E,), _ = _exact_setup(v, [eps])
        hit = (sums == 0) if E == 0 else (np.abs(sums) < E)
        marginal_num = int(hit.sum())
        for w in W:
            hit &= np.abs(_float_sums(w)) < beta
        num, total = int(hit.sum()), 2 ** v.n
        joint, marginal = num / total, marginal_num / total
        extra = {"numerator": num, "denominator": total}
    else:
        rng = np.random.default_rng(rng_seed)
        X = rng.integers(0, 2, size=(trials, v.n), dtype=np.int8) * 2 - 1
        hv = np.abs(X @ v.entries) < eps if eps > 0 else (X @ v.entries) == 0
        marginal = float(hv.mean())
        if k:
            hv &= (np.abs(X @ W.T) < beta).all(axis=1)
        joint = float(hv.mean())
        extra = {"stderr": math.sqrt(joint * (1 - joint) / trials), "trials": trials}
    bound = marginal * math.exp(-k)
    return {"joint": joint, "marginal": marginal, "k": k, "product_bound": bound,
            "ratio": joint / bound if bound > 0 else None, **extra}


def orthogonal_fixture(n, k, rng_seed):
    """Random unit v and k orthonormal vectors orthogonal to it."""
    rng = np.random.default_rng(rng_seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, k + 1)))
    return Q[:, 0].copy(), Q[:, 1:].T.copy()


def random_sign_matrices(ensemble, n, trials, rng):
    M = rng.integers(0, 2, size=(trials, n, n), dtype=np.int8).astype(np.int64) * 2 - 1
    if ensemble == "symmetric":
        iu = np.triu_indices(n, 1)
        M[:, iu[1], iu[0]] = M[:, iu[0], iu[1]]
    elif ensemble != "iid":
        raise InvalidArgument("ensemble must be 'symmetric' or 'iid'")
    return M


def _bareiss_batch(M):
    """Exact singularity flags for a batch of small integer matrices (fraction-free elimination)."""
    M = M.copy()
    T, n, _ = M.shape
    singular = np.zeros(T, dtype=bool)
    prev = np.ones(T, dtype=np.int64)
    rows = np.arange(T)
    for k in range(n - 1):
        nz = M[:, k:, k] != 0
        has = nz.any(axis=1)
        singular |= ~has
        piv = k + np.argmax(nz, axis=1)
        swap = M[rows, piv].copy()
        M[rows, piv] = M[:, k]
        M[:, k] = swap
        M[singular] = 0
        M[singular, k, k] = 1
        sub = M[:, k + 1:, k + 1:] * M[:, k, k][:, None, None] - M[:, k + 1:, k][:, :, None] * M[:, k, k + 1:][:, None, :]
        M[:, k + 1:, k + 1:] = sub // prev[:, None, None]
        prev = M[:, k, k].copy()
    return singular | (M[:, n - 1, n - 1] == 0)


def _bareiss_single(A):
    M = [list(map(int, row)) for row in A]
    n = len(M)
    prev = 1
    for k in range(n - 1):
        p = next((r for r in range(k, n) if M[r][k] != 0), None)
        if p is None:
            return True
        M[k], M[p] = M[p], M[k]
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return M[n - 1][n - 1] == 0


def is_singular(M):
    """Exact singularity test for integer matrices; accepts one matrix or a stack."""
    M = np.asarray(M, dtype=np.int64)
    batch = M.reshape(-1, M.shape[-2], M.shape[-1])
    n = batch.shape[-1]
    if n <= 15 and np.abs(batch).max(initial=0) <= 1:
        out = _bareiss_batch(batch)
    else:
        out = np.array([_bareiss_single(A) for A in batch], dtype=bool)
    return out if M.ndim == 3 else bool(out[0])


def singularity_exact(ensemble, n):
    """Exact singular fraction by enumerating every sign matrix (n <= 4)."""
    if n > 4:
        raise SizeLimitError("enumeration limited to n <= 4")
    if ensemble == "symmetric":
        pos = list(zip(*np.triu_indices(n)))
    elif ensemble == "iid":
        pos = [(i, j) for i in range(n) for j in range(n)]
    else:
        raise InvalidArgument("ensemble must be 'symmetric' or 'iid'")
    m = len(pos)
    codes = np.arange(2 ** m)
    bits = ((codes[:, None] >> np.arange(m)) & 1) * 2 - 1
    M = np.zeros((2 ** m, n, n), dtype=np.int64)
    for c, (i, j) in enumerate(pos):
        M[:, i, j] = bits[:, c]
        if ensemble == "symmetric":
            M[:, j, i] = bits[:, c]
    return Fraction(int(is_singular(M).sum()), 2 ** m)


def singularity_mc(ensemble, n, trials, rng_seed, chunk=20000):
    rng = np.random.default_rng(rng_seed)
    count = 0
    for s in range(0, trials, chunk):
        count += int(is_singular(random_sign_matrices(ensemble, n, min(chunk, trials - s), rng)).sum())
    p = count / trials
    rec = {"ensemble": ensemble, "n": n, "trials": trials, "singular": count, "p_hat": p,
           "stderr": math.sqrt(p * (1 - p) / trials), "exact": None}
    if n <= 4:
        ex = singularity_exact(ensemble, n)
        rec["exact"] = f"{ex.numerator}/{ex.denominator}"
        rec["exact_value"] = float(ex)
    return rec


def spectrum_mc(ensemble, n, trials, eps_grid, rng_seed, v=None, chunk=500):
    """Empirical CDF of sqrt(n) * sigma_min and the f_eps estimate P(|A v| <= eps sqrt(n)) for a fixed v."""
    if n > 200:
        raise SizeLimitError("n must be at most 200")
    rng = np.random.default_rng(rng_seed)
    if v is None:
        v = rng.standard_normal(n)
        v /= np.linalg.norm(v)
    v = np.asarray(v, dtype=float)
    smin = np.empty(trials)
    av = np.empty(trials)
    for s in range(0, trials, chunk):
        M = random_sign_matrices(ensemble, n, min(chunk, trials - s), rng).astype(float)
        smin[s:s + len(M)] = np.linalg.svd(M, compute_uv=False)[:, -1]
        av[s:s + len(M)] = np.linalg.norm(M @ v, axis=1)
    eps = np.asarray(eps_grid, dtype=float)
    scaled = smin * math.sqrt(n)
    cdf = (scaled[None, :] <= eps[:, None]).mean(axis=1)
    feps = (av[None, :] <= eps[:, None] * math.sqrt(n)).mean(axis=1)
    return {"ensemble": ensemble, "n": n, "trials": trials, "eps": eps.tolist(),
            "cdf": cdf.tolist(), "f_eps": feps.tolist(), "sigma_min": smin, "v": v}


def cdf_slope(eps, cdf):
    """Least-squares slope of the empirical CDF against eps."""
    return float(np.polyfit(np.asarray(eps, dtype=float), np.asarray(cdf, dtype=float), 1)[0])
