"""The eleven numbered acceptance criteria, each at its stated tolerance and time budget.

A summary line per criterion (PASS/FAIL, wall time, measured values) is printed
at the end of the pytest run.
"""
import io
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.spatial import cKDTree

from smallscale.cli import COMMANDS, run_cli
from smallscale.discrepancy import (
    ConstraintSystem, Hypergraph, SignedColoring, beck_fiala, exhaustive_partial_coloring_oracle,
    lm_uniform_budget, lovett_meka_partial_coloring,
)
from smallscale.errors import RetryableFailure
from smallscale.littlewood import evaluate_on_circle, rudin_shapiro
from smallscale.lwo import (
    erdos_bound_check, joint_small_ball, orthogonal_fixture, rho_small_ball, singularity_exact,
    singularity_mc,
)
from smallscale.nibble import greedy_independent_set, nibble_independent_set, shearer_target
from smallscale.packing import (
    GUARD, nibble_packing_pipeline, sample_poisson_box, saturated_greedy_packing,
    spherical_code_pipeline,
)

from shared_runs import CLI_FIXTURES, SPENCER_SIZES, flat_poly, nibble_graph, spencer_batch

FANO = ((0, 1, 2), (0, 3, 4), (0, 5, 6), (1, 3, 5), (1, 4, 6), (2, 3, 6), (2, 4, 5))


class Check:
    """Collects named conditions so every one is reported even when an early one fails."""

    def __init__(self, record_property, budget):
        self.record = record_property
        self.budget = budget
        self.start = time.perf_counter()
        self.items = []

    def __call__(self, name, ok, value=""):
        self.items.append((name, bool(ok), value))

    def finish(self):
        secs = time.perf_counter() - self.start
        self("time", secs <= self.budget, f"{secs:.1f}/{self.budget} s")
        parts = [f"{n}={'ok' if ok else 'NO'}" + (f" [{v}]" if v != "" else "") for n, ok, v in self.items]
        detail = "; ".join(parts)
        self.record("detail", detail)
        print(detail)
        failed = [n for n, ok, _ in self.items if not ok]
        assert not failed, f"failed: {failed}; {detail}"


@pytest.mark.acceptance(1, "Rudin-Shapiro identity")
def test_criterion_01_rudin_shapiro(record_property):
    chk = Check(record_property, 5)
    worst = 0.0
    for t in range(13):
        pair = rudin_shapiro(t)
        P = evaluate_on_circle(pair.p, 4096)
        Q = evaluate_on_circle(pair.q, 4096)
        target = 2.0 ** (t + 1)
        worst = max(worst, float(np.max(np.abs(np.abs(P) ** 2 + np.abs(Q) ** 2 - target)) / target))
    chk("identity", worst <= 1e-9, f"max rel err {worst:.2e}")
    chk.finish()


def random_hypergraph(rng):
    n = int(rng.integers(1, 201))
    d = int(rng.integers(1, 11))
    m = int(rng.integers(1, 201))
    edges = [[] for _ in range(m)]
    for v in range(n):
        k = min(int(rng.integers(0, d + 1)), m)
        for j in rng.choice(m, size=k, replace=False):
            edges[j].append(v)
    return Hypergraph(n, tuple(edges))


@pytest.mark.acceptance(2, "Beck-Fiala")
def test_criterion_02_beck_fiala(record_property):
    chk = Check(record_property, 30)
    rng = np.random.default_rng(2)
    bad = 0
    for _ in range(1000):
        H = random_hypergraph(rng)
        col = beck_fiala(H)
        s = col.signs
        if any(abs(int(s[list(e)].sum())) > 2 * H.max_degree - 1 for e in H.edges if e):
            bad += 1
    chk("random hypergraphs", bad == 0, f"{bad} of 1000 over 2d-1")
    H = Hypergraph(7, FANO)
    disc = H.discrepancy(beck_fiala(H))
    opt = min(H.discrepancy(SignedColoring(np.array(x))) for x in itertools.product((-1, 1), repeat=7))
    chk("fano", opt <= disc <= 5, f"output {disc}, optimum {opt}")
    chk.finish()


@pytest.mark.acceptance(3, "Lovett-Meka partial coloring")
def test_criterion_03_lovett_meka(record_property):
    chk = Check(record_property, 120)
    first_fail = exhausted = post_bad = oracle_bad = oracle_runs = 0
    for i in range(500):
        rng = np.random.default_rng(3000 + i)
        n = int(rng.integers(8, 33))
        m = int(rng.integers(1, 9))
        M = rng.choice([-1.0, 1.0], size=(m, n)) if i % 2 else rng.uniform(-1, 1, size=(m, n))
        c = lm_uniform_budget(m)
        A = ConstraintSystem.from_matrix(M, c)
        assert A.gate() <= 1 / 16 * (1 + 1e-12)
        x0 = np.zeros(n) if i % 2 else rng.uniform(-0.5, 0.5, size=n)
        x = None
        for attempt in range(5):
            try:
                x = lovett_meka_partial_coloring(A, x0, 100 * i + attempt)
                break
            except RetryableFailure:
                first_fail += attempt == 0
        if x is None:
            exhausted += 1
            continue
        bound = c * math.sqrt(n)
        if np.max(np.abs(M @ (x.values - x0))) > bound * (1 + 1e-9) or len(x.frozen) < n / 4:
            post_bad += 1
        if n <= 16:
            oracle_runs += 1
            oracle_bad += exhaustive_partial_coloring_oracle(A, bound) is None
    chk("postconditions", post_bad == 0, f"{post_bad} violations")
    chk("first-attempt failure rate", first_fail <= 0.2 * 500, f"{first_fail}/500")
    chk("success within 5 attempts", exhausted == 0, f"{exhausted} exhausted")
    chk("oracle feasibility", oracle_bad == 0, f"{oracle_runs} oracle runs, {oracle_bad} infeasible")
    chk.finish()


@pytest.mark.acceptance(4, "Spencer pipeline")
def test_criterion_04_spencer(record_property):
    chk = Check(record_property, 120)
    for n in SPENCER_SIZES:
        ratios, medians = spencer_batch(n)
        chk(f"n={n} <= 15 sqrt(n)", ratios.max() <= 15, f"max {ratios.max():.2f}, median {np.median(ratios):.2f}")
        if n == 128:
            beat = int((ratios <= medians).sum())
            chk("n=128 <= baseline median", beat == len(ratios),
                f"{beat}/{len(ratios)}; median baseline {np.median(medians):.2f}")
    chk.finish()


@pytest.mark.acceptance(5, "Flat Littlewood polynomials")
def test_criterion_05_flat_littlewood(record_property):
    chk = Check(record_property, 600)
    for n in (256, 1024):
        P = flat_poly(n)
        a = np.asarray(P.coeffs)
        chk(f"n={n} attempts", P.meta["attempts"] <= 10, P.meta["attempts"])
        chk(f"n={n} +-1", np.issubdtype(a.dtype, np.integer) and bool(np.all(np.abs(a) == 1)))
        N = 64 * 4 * n
        vals = np.abs(np.fft.fft(a.astype(float), N))
        parseval = abs(np.mean(vals ** 2) - a.size) / a.size
        root = math.sqrt(4 * n)
        chk(f"n={n} Parseval", parseval <= 1e-6, f"{parseval:.1e}")
        chk(f"n={n} min", vals.min() >= 0.02 * root, f"{vals.min() / root:.4f} sqrt(4n)")
        chk(f"n={n} max", vals.max() <= 10 * root, f"{vals.max() / root:.3f} sqrt(4n)")
    chk.finish()


@pytest.mark.acceptance(6, "Nibble independent sets")
def test_criterion_06_nibble(record_property):
    chk = Check(record_property, 120)
    G = nibble_graph()
    D, D2 = G.max_degree, G.max_codegree
    chk("graph Delta ~ 64", 56 <= D <= 72, D)
    chk("codegree hypothesis", D2 <= D / math.log2(D) ** 3, f"Delta_2 = {D2} vs {D / math.log2(D) ** 3:.3f}")
    I, trace = nibble_independent_set(G, 0.125, 3)
    greedy = greedy_independent_set(G, 3)
    target = shearer_target(G.n, D)
    chk("independent", G.is_independent(I))
    chk(">= 0.7 n lnD/D", len(I) >= 0.7 * target, f"{len(I)} vs {0.7 * target:.0f}")
    chk(">= 2 x greedy", len(I) >= 2 * len(greedy), f"{len(I)} vs 2*{len(greedy)}")
    chk.finish()


def strict_overlaps(points, radius):
    if len(points) < 2:
        return 0
    pairs = cKDTree(points).query_pairs(2 * radius, output_type="ndarray")
    if not pairs.size:
        return 0
    dist = np.sqrt(((points[pairs[:, 0]] - points[pairs[:, 1]]) ** 2).sum(axis=1))
    return int((dist < 2 * radius - GUARD).sum())


@pytest.mark.acceptance(7, "Sphere packing")
def test_criterion_07_packing(record_property):
    chk = Check(record_property, 180)
    X = sample_poisson_box(6, 1e6 / 6 ** 6, 3.0, 6)
    g6 = saturated_greedy_packing(X, rng_seed=6)
    chk("d=6 density", g6.interior_density >= 0.9 * 2 ** -6,
        f"{g6.interior_density:.4f} vs {0.9 * 2 ** -6:.4f} ({g6.centers} centres of {len(X)})")
    chk("d=6 separation", strict_overlaps(g6.points, g6.radius) == 0 and g6.valid)
    nib, _ = nibble_packing_pipeline(2, 0.125, 10.0, 16.0, 2)
    g2 = saturated_greedy_packing(sample_poisson_box(2, 16.0, 10.0, 2), rng_seed=2)
    chk("d=2 nibble valid", nib.valid and strict_overlaps(nib.points, nib.radius) == 0)
    chk("d=2 greedy valid", g2.valid and strict_overlaps(g2.points, g2.radius) == 0)
    chk("d=2 within 50% of greedy", nib.interior_density >= 0.5 * g2.interior_density,
        f"{nib.interior_density:.3f} vs {g2.interior_density:.3f}")
    chk.finish()


def min_angle(points):
    P = np.asarray(points)
    best = math.pi
    for i, j in itertools.combinations(range(len(P)), 2):
        best = min(best, math.acos(max(-1.0, min(1.0, float(P[i] @ P[j])))))
    return best


@pytest.mark.acceptance(8, "Spherical codes")
def test_criterion_08_codes(record_property):
    chk = Check(record_property, 30)
    tri = spherical_code_pipeline(2, 2 * math.pi / 3, rng_seed=8)
    chk("d=2 2pi/3 count", tri["count"] == 3, tri["count"])
    bad = 0
    runs = [(2, 2 * math.pi / 3, s) for s in range(3)] + [(2, 0.5, 1), (3, math.pi / 3, 8), (4, 1.0, 8), (6, 1.2, 8)]
    for d, theta, seed in runs:
        code = spherical_code_pipeline(d, theta, rng_seed=seed, samples=1500)
        if len(code["points"]) > 1 and min_angle(code["points"]) < theta - GUARD:
            bad += 1
    chk("every code separated", bad == 0, f"{len(runs)} codes, {bad} violations")
    chk.finish()


@pytest.mark.acceptance(9, "Littlewood-Offord exact suite")
def test_criterion_09_lwo_exact(record_property):
    chk = Check(record_property, 60)
    chk("rho0((1,1)) max", rho_small_ball([1, 1], 0, "maximize").fraction() == Fraction(1, 2))
    chk("rho0((1,1,1,1))", rho_small_ball([1, 1, 1, 1], 0, "maximize").fraction() == Fraction(6, 16))
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(200):
        n = int(rng.integers(1, 17))
        v = rng.integers(1, 30, size=n) * rng.choice([-1, 1], size=n)
        if rng.random() < 0.5:
            v = v * rng.uniform(0.1, 2.0, size=n)
        bad += not erdos_bound_check(v)["holds"]
    chk("Erdos bound, 200 vectors", bad == 0, f"{bad} violations")
    v, _ = orthogonal_fixture(12, 1, 9)
    joint = joint_small_ball(v, [], 0.3, 0.3)
    rho = rho_small_ball(v, 0.3, 0.0)
    chk("joint k=0 bit-for-bit", joint["joint"] == rho.value and joint["numerator"] == rho.numerator)
    chk("symmetric n=2 exact", singularity_exact("symmetric", 2) == Fraction(1, 2))
    mc = singularity_mc("symmetric", 2, 100000, 9)
    chk("symmetric n=2 MC 4 sigma", abs(mc["p_hat"] - 0.5) <= 4 * math.sqrt(0.25 / 100000), f"{mc['p_hat']:.5f}")
    chk.finish()


@pytest.mark.acceptance(10, "Negative-correlation audit")
def test_criterion_10_joint(record_property):
    chk = Check(record_property, 60)
    shapes = []
    mono = bound = True
    for seed in range(10):
        v, W = orthogonal_fixture(12, 4, seed)
        recs = [joint_small_ball(v, W[:k], 0.3, 0.3) for k in range(5)]
        nums = [r["numerator"] for r in recs]
        mono &= all(a >= b for a, b in zip(nums, nums[1:]))
        bound &= all(r["joint"] <= r["marginal"] * 1.05 for r in recs[2:])
        shapes.append("-".join(map(str, nums)))
    chk("non-increasing in k", mono, ", ".join(shapes[:3]) + ", ...")
    chk("joint <= 1.05 marginal at k >= 2", bound)
    chk.finish()


@pytest.mark.acceptance(11, "CLI determinism")
def test_criterion_11_determinism(record_property):
    chk = Check(record_property, 60)
    differing = []
    for name in sorted(COMMANDS):
        outs = []
        for _ in range(2):
            buf = io.StringIO()
            code = run_cli([name] + CLI_FIXTURES[name], stdout=buf)
            outs.append((code, buf.getvalue()))
        if outs[0] != outs[1] or outs[0][0] != 0:
            differing.append(name)
    chk("byte-identical JSON", not differing, f"{len(COMMANDS)} subcommands, differing: {differing or 'none'}")
    chk.finish()
