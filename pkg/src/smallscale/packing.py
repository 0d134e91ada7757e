"""Sphere packings and spherical codes as independent sets in geometric graphs."""
from __future__ import annotations

import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from .errors import InvalidArgument, SizeLimitError
from .nibble import SparseGraph, greedy_independent_set, nibble_independent_set

POINT_CAP = 10 ** 7
GUARD = 1e-12


def unit_ball_volume(d, r=1.0):
    return math.exp(0.5 * d * math.log(math.pi) - math.lgamma(0.5 * d + 1) + d * math.log(r)) if r > 0 else 0.0


def unit_ball_radius(d):
    """Radius of the d-ball of volume one."""
    if d < 1:
        raise InvalidArgument("d must be at least 1")
    return math.exp((math.lgamma(0.5 * d + 1) - 0.5 * d * math.log(math.pi)) / d)


def ball_intersection_volume(d, R, dist):
    """Volume of two d-balls of radius R at centre distance dist (1-d quadrature over slices)."""
    if dist >= 2 * R:
        return 0.0
    if d == 1:
        return 2 * R - dist
    h = dist / 2
    val, _ = integrate.quad(lambda t: unit_ball_volume(d - 1, math.sqrt(max(R * R - t * t, 0.0))),
                            h, R, epsabs=0, epsrel=1e-11, limit=200)
    return 2 * val


@dataclass
class PointCloud:
    points: np.ndarray
    space: str = "box"
    L: float | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim == 1:
            self.points = self.points.reshape(-1, 1)
        if not np.isfinite(self.points).all():
            raise InvalidArgument("non-finite coordinates")
        if self.space == "box":
            if self.L is None:
                raise InvalidArgument("box cloud needs L")
            if self.points.size and np.abs(self.points).max() > self.L:
                raise InvalidArgument("point outside [-L, L]^d")
        elif self.space == "sphere":
            if self.points.size and np.abs(np.linalg.norm(self.points, axis=1) - 1).max() > 1e-12:
                raise InvalidArgument("sphere points must have unit norm")
        else:
            raise InvalidArgument(f"unknown space {self.space!r}")

    @property
    def d(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def subset(self, idx):
        return PointCloud(self.points[idx], self.space, self.L)

    def to_csv(self):
        buf = io.StringIO()
        buf.write(",".join(f"x{i + 1}" for i in range(self.d)) + "\n")
        np.savetxt(buf, self.points, delimiter=",", fmt="%.17g")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text, space="box", L=None):
        pts = np.loadtxt(io.StringIO(text), delimiter=",", skiprows=1, ndmin=2)
        return cls(pts, space, L)


@dataclass
class PackingReport:
    centers: int
    radius: float
    density: float
    interior_density: float
    window_centers: int
    min_distance: float | None
    valid: bool
    d: int
    L: float
    extra: dict = field(default_factory=dict)
    points: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        out = asdict(self)
        out.pop("points")
        out.update(out.pop("extra"))
        return out


def sample_poisson_box(d, intensity, L, rng_seed):
    """Poisson process of the given intensity on ``[-L, L]^d``."""
    if intensity < 0 or L <= 0 or d < 1:
        raise InvalidArgument("need intensity >= 0, L > 0, d >= 1")
    mean = intensity * (2 * L) ** d
    if mean > POINT_CAP:
        raise SizeLimitError(f"expected {mean:.3g} points exceeds cap {POINT_CAP}")
    rng = np.random.default_rng(rng_seed)
    m = int(rng.poisson(mean))
    return PointCloud(rng.uniform(-L, L, size=(m, d)), "box", float(L))


def prune_close_pairs(X, floor):
    """Drop the later point of every pair closer than ``floor``; returns (cloud, kept indices)."""
    if len(X) < 2 or floor <= 0:
        return X, np.arange(len(X))
    pairs = cKDTree(X.points).query_pairs(floor, output_type="ndarray")
    if pairs.size:
        dist = np.linalg.norm(X.points[pairs[:, 0]] - X.points[pairs[:, 1]], axis=1)
        pairs = pairs[dist < floor]
    drop = np.zeros(len(X), dtype=bool)
    drop[pairs.max(axis=1)] = True
    kept = np.flatnonzero(~drop)
    return X.subset(kept), kept


def _close_pairs(points, threshold):
    if len(points) < 2:
        return np.empty((0, 2), dtype=np.int64)
    pairs = cKDTree(points).query_pairs(threshold, output_type="ndarray")
    if pairs.size:
        dist = np.linalg.norm(points[pairs[:, 0]] - points[pairs[:, 1]], axis=1)
        pairs = pairs[dist < threshold]
    return pairs


def build_packing_graph(X, radius):
    """Edge between two points iff their Euclidean distance is below ``2 * radius``."""
    return SparseGraph.from_edges(len(X), _close_pairs(X.points, 2 * radius))


def min_pairwise_distance(points):
    if len(points) < 2:
        return None
    dist, _ = cKDTree(points).query(points, k=2)
    return float(dist[:, 1].min())


def packing_report(centers, radius, L, **extra):
    pts = np.asarray(centers, dtype=float)
    d = pts.shape[1]
    vol = unit_ball_volume(d, radius)
    m = len(pts)
    md = min_pairwise_distance(pts)
    valid = md is None or md >= 2 * radius - GUARD
    inner = L - 2 * radius
    if inner > 0 and m:
        in_win = int((np.abs(pts) <= inner).all(axis=1).sum())
        interior = in_win * vol / (2 * inner) ** d
    else:
        in_win, interior = 0, 0.0
    return PackingReport(m, radius, m * vol / (2 * L) ** d, interior, in_win, md, bool(valid), d, float(L), extra, pts)


def saturated_greedy_packing(X, radius=None, rng_seed=0, batch=4096):
    """Random-order greedy: a candidate is accepted iff it is at distance >= 2r from every accepted centre.

    The result is saturated with respect to the candidate cloud. Candidates are
    screened against the accepted set in batches and the survivors of a batch
    are then resolved one by one, which keeps the acceptance rule exact.
    """
    d = X.d
    r = unit_ball_radius(d) if radius is None else radius
    two_r = 2 * r
    rng = np.random.default_rng(rng_seed)
    order = rng.permutation(len(X))
    P = X.points
    accepted = np.empty((0, d))
    for s in range(0, len(order), batch):
        cand = P[order[s:s + batch]]
        if len(accepted):
            dist, _ = cKDTree(accepted).query(cand, k=1)
            cand = cand[dist >= two_r]
        new = []
        for p in cand:
            if not new or np.min(np.linalg.norm(np.asarray(new) - p, axis=1)) >= two_r:
                new.append(p)
        if new:
            accepted = np.vstack([accepted, new])
    return packing_report(accepted, r, X.L, candidates=len(X), method="saturated_greedy")


def nibble_packing_pipeline(d, gamma, L, intensity, rng_seed, prune_factor=0.25):
    """Sample, prune near pairs, build the packing graph and run the nibble.

    Returns ``(PackingReport, NibbleTrace)``.
    """
    seeds = np.random.SeedSequence(rng_seed).spawn(2)
    X = sample_poisson_box(d, intensity, L, seeds[0])
    r = unit_ball_radius(d)
    X, _ = prune_close_pairs(X, prune_factor * r)
    G = build_packing_graph(X, r)
    chosen, trace = nibble_independent_set(G, gamma, seeds[1], track_codegree=False)
    rep = packing_report(X.points[chosen], r, L, candidates=len(X), intensity=intensity,
                         max_degree=G.max_degree, expected_degree=intensity * 2 ** d, method="nibble")
    rep.extra["normalized_occupancy"] = rep.interior_density * 2 ** d / intensity if intensity else 0.0
    if not rep.valid:
        raise AssertionError("pipeline emitted overlapping balls")
    return rep, trace


def cap_volume(d, theta):
    """Normalised surface measure of a cap of angular radius theta on S^{d-1}."""
    if d < 2:
        raise InvalidArgument("d must be at least 2")
    if not 0 <= theta <= math.pi:
        raise InvalidArgument("theta must lie in [0, pi]")
    if theta > math.pi / 2:
        return 1.0 - cap_volume(d, math.pi - theta)
    k = d - 2
    # sin^k integrand normalised by its full integral sqrt(pi) G((d-1)/2) / G(d/2)
    log_norm = 0.5 * math.log(math.pi) + math.lgamma((d - 1) / 2) - math.lgamma(d / 2)
    scale = math.exp(-log_norm)
    f = lambda t: math.sin(t) ** k * scale
    val, _ = integrate.quad(f, 0.0, theta, epsabs=0, epsrel=1e-12, limit=200)
    return val


def sample_sphere(d, m, rng):
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g


def angular_separation(points):
    """Smallest pairwise angle of a set of unit vectors (None below two points)."""
    P = np.asarray(points, dtype=float)
    if len(P) < 2:
        return None
    G = np.clip(P @ P.T, -1.0, 1.0)
    np.fill_diagonal(G, -1.0)
    return float(np.arccos(G.max()))


def _circle_best(points, theta):
    """Largest subset of circle points with pairwise angle >= theta (greedy sweep from every start)."""
    ang = np.sort(np.mod(np.arctan2(points[:, 1], points[:, 0]), 2 * np.pi))
    m = len(ang)
    best = [0] if m else []
    ext = np.concatenate([ang, ang + 2 * np.pi])
    for s in range(m):
        chosen = [s]
        pos = s
        while True:
            nxt = int(np.searchsorted(ext, ext[pos] + theta - GUARD))
            if nxt >= s + m or ext[s] + 2 * np.pi - ext[nxt] < theta - GUARD:
                break
            chosen.append(nxt)
            pos = nxt
        if len(chosen) > len(best):
            best = chosen
    sel = ang[np.asarray(best) % m]
    return np.column_stack([np.cos(sel), np.sin(sel)])


def spherical_code_pipeline(d, theta_min, count_target=None, rng_seed=0, samples=2000, gamma=0.125,
                            grid=None):
    """Code with pairwise angle >= theta_min from an independent set in the angle-threshold graph.

    For ``d = 2`` the candidates may be a randomly rotated regular grid
    (the default there) and the nibble answer is compared with an exact sweep over
    the same candidates; the larger code is returned.
    """
    if not 0 < theta_min < math.pi:
        raise InvalidArgument("theta_min must lie in (0, pi)")
    if d < 2:
        raise InvalidArgument("d must be at least 2")
    seeds = np.random.SeedSequence(rng_seed).spawn(2)
    rng = np.random.default_rng(seeds[0])
    if d == 2 and grid is not False:
        # grid size a multiple of floor(2 pi / theta) so the regular polygon is on it
        k = max(1, int(math.floor(2 * math.pi / theta_min + 1e-9)))
        samples = k * math.ceil(samples / k)
        phase = rng.uniform(0, 2 * np.pi)
        a = phase + 2 * np.pi * np.arange(samples) / samples
        P = np.column_stack([np.cos(a), np.sin(a)])
    else:
        P = sample_sphere(d, samples, rng)
    chord = 2 * math.sin(theta_min / 2)
    pairs = _close_pairs(P, chord)
    if pairs.size:
        dots = np.einsum("ij,ij->i", P[pairs[:, 0]], P[pairs[:, 1]])
        pairs = pairs[np.arccos(np.clip(dots, -1, 1)) < theta_min - GUARD]
    G = SparseGraph.from_edges(len(P), pairs)
    if G.max_degree >= 2:
        chosen, _ = nibble_independent_set(G, gamma, seeds[1], track_codegree=False, double_count_samples=0)
    else:
        chosen = greedy_independent_set(G, seeds[1])
    code = P[chosen]
    method = "nibble"
    if d == 2:
        swept = _circle_best(P, theta_min)
        if len(swept) > len(code):
            code, method = swept, "circle_sweep"
    sep = angular_separation(code)
    valid = sep is None or sep >= theta_min - GUARD
    if not valid:
        raise AssertionError("code violates the angular separation")
    n_code = len(code)
    return {
        "d": d,
        "theta_min": theta_min,
        "count": n_code,
        "count_target": count_target,
        "target_met": None if count_target is None else n_code >= count_target,
        "min_angle": sep,
        "valid": bool(valid),
        "samples": samples,
        "method": method,
        "covered_half_angle_caps": n_code * cap_volume(d, theta_min / 2),
        "covered_full_angle_caps": n_code * cap_volume(d, theta_min),
        "points": code,
    }


def packing_svg(points, L, radius, size=480):
    """Scatter of a 2-d packing: one circle of radius r per centre inside the box outline."""
    scale = size / (2 * L)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
             f'<rect x="0" y="0" width="{size}" height="{size}" fill="none" stroke="black"/>']
    for x, y in np.asarray(points):
        parts.append(f'<circle cx="{(x + L) * scale:.3f}" cy="{(L - y) * scale:.3f}" r="{radius * scale:.3f}" '
                     'fill="none" stroke="steelblue"/>')
    parts.append("</svg>\n")
    return "\n".join(parts)
