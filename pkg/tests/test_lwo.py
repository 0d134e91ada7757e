import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from smallscale.errors import InvalidArgument, SizeLimitError
from smallscale.lwo import (
    WeightVector, cdf_slope, check_orthonormal, erdos_bound_check, is_singular, joint_small_ball,
    lcd, orthogonal_fixture, random_sign_matrices, rho_small_ball, rv_bound_audit, singularity_exact,
    singularity_mc, spectrum_mc,
)


def brute_rho(v, eps, b):
    v = [Fraction(x) for x in v]
    eps, b = Fraction(eps), Fraction(b)
    hits = 0
    for signs in itertools.product((-1, 1), repeat=len(v)):
        s = sum(x * y for x, y in zip(signs, v)) - b
        hits += (s == 0) if eps == 0 else (abs(s) < eps)
    return Fraction(hits, 2 ** len(v))


def brute_rho_max(v, eps):
    v = [Fraction(x) for x in v]
    sums = sorted(sum(x * y for x, y in zip(signs, v)) for signs in itertools.product((-1, 1), repeat=len(v)))
    if eps == 0:
        return Fraction(max(sums.count(s) for s in set(sums)), len(sums))
    # an optimal open window can be slid until its left end sits just below an atom
    best = max(sum(1 for t in sums if s <= t < s + 2 * Fraction(eps)) for s in sums)
    return Fraction(best, len(sums))


def fraction_rank_deficient(M):
    A = [[Fraction(int(x)) for x in row] for row in M]
    n = len(A)
    for c in range(n):
        p = next((r for r in range(c, n) if A[r][c] != 0), None)
        if p is None:
            return True
        A[c], A[p] = A[p], A[c]
        for r in range(c + 1, n):
            f = A[r][c] / A[c][c]
            A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return False


small_ints = st.lists(st.integers(-6, 6), min_size=1, max_size=9)


# ---- rho examples

def test_rho_pair_cancels():
    assert rho_small_ball([1, 1], 0, 0).fraction() == Fraction(1, 2)


def test_rho_sparse_vector_maximize():
    assert rho_small_ball([1, -1, 0, 0, 0, 0], 0, "maximize").value == 0.5


def test_rho_ones_four():
    est = rho_small_ball([1, 1, 1, 1], 0, "maximize")
    assert est.fraction() == Fraction(6, 16) and est.b == 0.0


def test_rho_exact_rational_at_zero():
    # 0.1 + 0.2 - 0.3 is not zero in floating point
    v = WeightVector([Fraction(1, 10), Fraction(2, 10), Fraction(-3, 10)])
    assert rho_small_ball(v, 0, 0).fraction() == Fraction(2, 8)


def test_rho_size_limit():
    with pytest.raises(SizeLimitError):
        rho_small_ball(np.ones(25), 0.1, 0)


def test_rho_rejects_negative_eps():
    with pytest.raises(InvalidArgument):
        rho_small_ball([1.0], -1, 0)


@given(small_ints, st.integers(0, 5), st.integers(-4, 4))
def test_rho_matches_enumeration(v, eps, b):
    est = rho_small_ball(v, eps, b)
    assert est.fraction() == brute_rho(v, eps, b)
    assert est.denominator == 2 ** len(v)


@given(small_ints, st.integers(0, 5))
def test_rho_maximize_matches_enumeration(v, eps):
    est = rho_small_ball(v, eps, "maximize")
    assert est.fraction() == brute_rho_max(v, eps)
    assert est.value >= rho_small_ball(v, eps, 0).value
    assert brute_rho(v, eps, Fraction(est.b)) == est.fraction()


@given(small_ints, st.randoms(use_true_random=False))
def test_rho_permutation_and_sign_invariance(v, rnd):
    w = list(v)
    rnd.shuffle(w)
    w = [x if rnd.random() < 0.5 else -x for x in w]
    assert rho_small_ball(v, 0, "maximize").fraction() == rho_small_ball(w, 0, "maximize").fraction()
    assert rho_small_ball(v, 0, 0).fraction() == rho_small_ball(w, 0, 0).fraction()


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=1, max_size=10))
def test_rho_monotone_in_eps(v):
    vals = [rho_small_ball(v, e, 0).value for e in (0, 0.1, 0.5, 1, 2, 50)]
    assert all(a <= b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == 1.0


@pytest.mark.parametrize("v,eps,b", [
    ([1, 1, 1, 1, 1, 1], 1.5, 0.0),
    ([0.3, 0.7, 1.1, -0.4, 0.9, 0.2, 0.5, 1.3], 0.4, 0.2),
    (list(np.ones(16) / 4), 0.5, 0.0),
])
def test_monte_carlo_within_four_sigma(v, eps, b):
    ex = rho_small_ball(v, eps, b).value
    mc = rho_small_ball(v, eps, b, mode="monte-carlo", trials=200000, rng_seed=3)
    assert abs(mc.value - ex) <= 4 * math.sqrt(ex * (1 - ex) / mc.trials) + 1e-12


def test_monte_carlo_maximize_atoms():
    mc = rho_small_ball([1, 1, 1, 1], 0, "maximize", mode="monte-carlo", trials=40000, rng_seed=1)
    assert abs(mc.value - 0.375) <= 4 * mc.stderr
    assert mc.b == 0.0
    w = rho_small_ball([1, 2, 4], 1, "maximize", mode="monte-carlo", trials=40000, rng_seed=2)
    assert abs(w.value - float(brute_rho_max([1, 2, 4], 1))) <= 4 * w.stderr + 1e-12


# ---- Erdos

def test_erdos_equality_ones():
    rec = erdos_bound_check([1, 1, 1, 1])
    assert rec["rho0"] == rec["bound"] == Fraction(6, 16) and rec["holds"]


def test_erdos_single():
    rec = erdos_bound_check([2.5])
    assert rec["rho0"] == rec["bound"] == Fraction(1, 2)


def test_erdos_powers_of_two():
    rec = erdos_bound_check([1, 2, 4, 8])
    assert rec["rho0"] == Fraction(1, 16) and rec["holds"]


def test_erdos_rejects_zero():
    with pytest.raises(InvalidArgument):
        erdos_bound_check([1, 0, 2])


@given(st.lists(st.integers(1, 9).map(lambda x: x * (-1) ** x), min_size=1, max_size=12))
def test_erdos_always_holds(v):
    rec = erdos_bound_check(v)
    assert rec["holds"]
    assert rec["bound"] == Fraction(math.comb(len(v), len(v) // 2), 2 ** len(v))


# ---- LCD

def scan_oracle(x, tau, phi_max, step):
    # independent lattice distance: enumerate nearby integer points
    for phi in np.arange(1, int(phi_max / step) + 1) * step:
        y = phi * np.asarray(x)
        base = np.floor(y)
        best = math.inf
        for offs in itertools.product((0, 1, -1, 2), repeat=len(y)):
            z = base + np.array(offs)
            if np.any(z != 0):
                best = min(best, float(np.linalg.norm(y - z)))
        if best <= tau:
            return phi
    return None


def test_lcd_basis_vector():
    # sqrt(alpha n) = 0.3 with n = 1
    res = lcd(WeightVector.unit([1.0]), 0.09, 1.5, 0.01)
    assert res.value == pytest.approx(0.7, abs=1e-8)


def test_lcd_flat_vector():
    res = lcd(WeightVector.unit(np.ones(4)), 0.0625, 5.0, 0.01)
    assert res.value == pytest.approx(1.5, abs=1e-8)
    assert scan_oracle(np.ones(4) / 2, 0.5, 5.0, 0.01) == pytest.approx(1.5, abs=0.011)


def test_lcd_sentinel():
    res = lcd(WeightVector.unit([1.0, 0, 0]), 0.01, 0.5, 0.01)
    assert res.value is None and res.exceeds
    assert (res.margins > 0).all()


@given(st.lists(st.floats(-1, 1), min_size=2, max_size=3).filter(lambda v: np.linalg.norm(v) > 0.2),
       st.floats(0.05, 0.3))
def test_lcd_matches_scan(v, alpha):
    w = WeightVector.unit(v)
    tau = math.sqrt(alpha * w.n)
    res = lcd(w, alpha, 4.0, 0.02)
    ref = scan_oracle(w.entries, tau, 4.0, 0.02)
    if ref is None:
        assert res.value is None
    else:
        assert ref - 0.02 - 1e-9 <= res.value <= ref + 1e-9


def test_lcd_bad_alpha():
    with pytest.raises(InvalidArgument):
        lcd(WeightVector.unit([1.0]), 1.5, 1.0, 0.1)


# ---- RV audit

def test_rv_audit_flat_sixteen():
    rec = rv_bound_audit(WeightVector.unit(np.ones(16)), 0.1, 0.5)
    assert rec["probability"] == pytest.approx(math.comb(16, 8) / 2 ** 16)
    assert rec["mode"] == "exact"


def test_rv_audit_large_eps():
    v = WeightVector.unit(np.arange(1, 10))
    assert rv_bound_audit(v, 0.1, 3.0001)["probability"] == 1.0


def test_rv_audit_distinct_sums():
    rec = rv_bound_audit(WeightVector.unit([1, 2, 4, 8, 16]), 0.1, 0.0)
    assert rec["probability"] == 0.0


# ---- joint small ball

def test_joint_k0_bit_for_bit():
    v, _ = orthogonal_fixture(12, 3, 5)
    rec = joint_small_ball(v, [], 0.3, 0.3)
    est = rho_small_ball(v, 0.3, 0.0)
    assert rec["joint"] == est.value and rec["numerator"] == est.numerator


def test_joint_redundant_constraint():
    v, _ = orthogonal_fixture(10, 1, 2)
    rec = joint_small_ball(v, [v], 0.3, 0.4)
    assert rec["joint"] == rec["marginal"]


def test_joint_decreasing_in_k():
    v, W = orthogonal_fixture(12, 4, 0)
    joints = [joint_small_ball(v, W[:k], 0.3, 0.3)["joint"] for k in range(5)]
    assert all(a >= b for a, b in zip(joints, joints[1:]))
    rec = joint_small_ball(v, W[:3], 0.3, 0.3)
    assert rec["product_bound"] == pytest.approx(rec["marginal"] * math.exp(-3))


def test_joint_rejects_non_orthonormal():
    with pytest.raises(InvalidArgument):
        joint_small_ball(np.ones(3) / math.sqrt(3), [[1, 0, 0], [1, 0, 0]], 0.3, 0.3)
    with pytest.raises(InvalidArgument):
        check_orthonormal([[2.0, 0.0]])


def test_joint_monte_carlo_close():
    v, W = orthogonal_fixture(12, 2, 1)
    ex = joint_small_ball(v, W, 0.5, 0.8)
    mc = joint_small_ball(v, W, 0.5, 0.8, mode="monte-carlo", trials=200000, rng_seed=4)
    assert abs(mc["joint"] - ex["joint"]) <= 4 * math.sqrt(ex["joint"] * (1 - ex["joint"]) / 200000)


# ---- singularity

def det_enumeration(ensemble, n):
    if ensemble == "symmetric":
        pos = [(i, j) for i in range(n) for j in range(i, n)]
    else:
        pos = [(i, j) for i in range(n) for j in range(n)]
    sing = 0
    for signs in itertools.product((-1, 1), repeat=len(pos)):
        M = np.zeros((n, n))
        for (i, j), s in zip(pos, signs):
            M[i, j] = s
            M[j, i] = s if ensemble == "symmetric" else M[j, i]
        sing += round(np.linalg.det(M)) == 0
    return Fraction(sing, 2 ** len(pos))


@pytest.mark.parametrize("ensemble", ["iid", "symmetric"])
@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_singularity_exact_matches_det(ensemble, n):
    assert singularity_exact(ensemble, n) == det_enumeration(ensemble, n)


def test_singularity_small_values():
    assert singularity_exact("iid", 1) == 0
    assert singularity_exact("iid", 2) == Fraction(1, 2)
    assert singularity_exact("symmetric", 2) == Fraction(1, 2)


@given(st.integers(1, 7), st.integers(0, 2 ** 32), st.integers(1, 3))
def test_is_singular_matches_fractions(n, seed, spread):
    rng = np.random.default_rng(seed)
    M = rng.integers(-spread, spread + 1, size=(n, n))
    assert is_singular(M) == fraction_rank_deficient(M)


def test_is_singular_batch_agrees_with_single():
    rng = np.random.default_rng(0)
    M = random_sign_matrices("iid", 6, 400, rng)
    flags = is_singular(M)
    assert flags.tolist() == [fraction_rank_deficient(A) for A in M]


def test_singularity_mc_near_exact():
    rec = singularity_mc("symmetric", 3, 40000, 1)
    assert rec["exact"] == "1/2"
    assert abs(rec["p_hat"] - 0.5) <= 4 * rec["stderr"]


def test_symmetric_matrices_are_symmetric():
    M = random_sign_matrices("symmetric", 5, 10, np.random.default_rng(0))
    assert (M == M.transpose(0, 2, 1)).all()


# ---- spectrum

def test_spectrum_one_by_one():
    rec = spectrum_mc("iid", 1, 200, [0.5, 0.99, 1.0], 0)
    assert np.allclose(rec["sigma_min"], 1.0)
    assert rec["cdf"][:2] == [0.0, 0.0]


def test_f_eps_basis_vector():
    n = 8
    e1 = np.zeros(n)
    e1[0] = 1
    rec = spectrum_mc("symmetric", n, 300, [0.5, 0.999, 1.0, 1.5], 2, v=e1)
    assert rec["f_eps"] == [0.0, 0.0, 1.0, 1.0]


def test_spectrum_slope_symmetric_40():
    grid = np.linspace(0.1, 1.0, 10)
    rec = spectrum_mc("symmetric", 40, 2000, grid, 7)
    slope = cdf_slope(rec["eps"], rec["cdf"])
    assert 0 <= slope <= 3
    assert all(a <= b for a, b in zip(rec["cdf"], rec["cdf"][1:]))


def test_spectrum_size_cap():
    with pytest.raises(SizeLimitError):
        spectrum_mc("iid", 201, 1, [1.0], 0)
