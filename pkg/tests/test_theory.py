import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epsrank.exceptions import ShapeError
from epsrank.gram import build_grid, gram_matrix
from epsrank.linalg import sym_eig
from epsrank.theory import compress, haar_orthonormal, lemma_bound, probe_lemma, select_subset

GRID = build_grid((-1, 1), "gauss", 64)
X = GRID.points


def _tanh_family(seed, n=10):
    r = np.random.default_rng(seed)
    return np.tanh(X * r.uniform(-3, 3, n) + r.uniform(-3, 3, n)), r


def test_duplicate_function_compresses_exactly():
    F = np.stack([np.sin(np.pi * X[:, 0]), np.cos(np.pi * X[:, 0]), np.sin(np.pi * X[:, 0])], 1)
    res = compress(F, np.ones(3), GRID, 1e-6)
    assert res.p == 2
    assert res.measured_error <= 1e-10
    assert res.measured_error <= res.certified_bound
    # f = 2 sin + cos whichever copy of sin is kept
    full = np.zeros(3)
    full[res.selected_indices] = res.beta_tilde
    np.testing.assert_allclose(full[0] + full[2], 2.0, atol=1e-10)
    np.testing.assert_allclose(full[1], 1.0, atol=1e-10)


def test_full_rank_is_identity():
    F, r = _tanh_family(0, 4)
    beta = r.standard_normal(4)
    res = compress(F, beta, GRID, 0.0)
    assert res.p == 4 and res.selected_indices == [0, 1, 2, 3]
    np.testing.assert_array_equal(res.beta_tilde, beta)
    assert res.measured_error == 0


@pytest.mark.parametrize("seed", range(12))
def test_certificate_random_tanh(seed):
    F, r = _tanh_family(seed)
    beta = r.standard_normal(10)
    beta /= np.linalg.norm(beta)
    lam = sym_eig(gram_matrix(F, GRID)).eigenvalues
    p = 2 + seed % 7
    eps = math.sqrt(lam[p - 1] * max(lam[p], 1e-300))
    res = compress(F, beta, GRID, eps)
    assert res.p == p
    assert 0 <= res.measured_error <= res.certified_bound
    assert res.certified_bound == pytest.approx((p + 1) * (10 - p) ** 2 * eps)


def test_certificate_with_near_epsilon_gap():
    F, r = _tanh_family(99)
    beta = r.standard_normal(10)
    lam = sym_eig(gram_matrix(F, GRID)).eigenvalues
    eps = lam[4] * (1 + 1e-9)  # eigenvalue 5 sits just below epsilon
    res = compress(F, beta, GRID, eps)
    assert res.p == 4
    assert res.measured_error <= res.certified_bound


def test_exact_dependence_is_exact_for_any_epsilon():
    F, r = _tanh_family(3, 5)
    lam5 = sym_eig(gram_matrix(F, GRID)).eigenvalues[-1]
    F = np.hstack([F, F[:, :2] @ np.array([[1.0], [-2.0]])])
    for eps in (lam5 / 10, lam5 / 1e4):
        res = compress(F, r.standard_normal(6), GRID, eps)
        assert res.p == 5
        assert res.measured_error <= 1e-10


def test_json_report():
    F, r = _tanh_family(1)
    data = json.loads(compress(F, r.standard_normal(10), GRID, 1e-6).to_json())
    assert {"p", "selected_indices", "beta_tilde", "certified_bound", "measured_error", "v22_min_sigma",
            "lemma_bound"} <= set(data)


def test_select_subset_symmetric_case():
    perm, sigma, _ = select_subset(np.array([[1.0], [1.0]]) / math.sqrt(2))
    assert sigma == pytest.approx(1 / math.sqrt(2))
    assert sigma >= lemma_bound(2, 1) - 1e-15


def test_select_subset_axis_case():
    perm, sigma, _ = select_subset(np.array([[1.0], [0.0], [0.0]]))
    assert perm[0] == 0 and sigma == 1.0


def test_select_subset_rejects_non_orthonormal():
    with pytest.raises(ShapeError):
        select_subset(np.ones((3, 1)))


def test_greedy_close_to_exhaustive():
    for seed in range(100):
        Q = haar_orthonormal(np.random.default_rng(seed), 8, 3)
        _, best, _ = select_subset(Q, "exhaustive")
        _, greedy, _ = select_subset(Q, "greedy")
        assert best / 2 <= greedy <= best + 1e-12


def test_auto_strategy_switches():
    Q = haar_orthonormal(np.random.default_rng(0), 30, 10)
    assert select_subset(Q)[2] == "greedy"
    assert select_subset(Q[:6, :1] / np.linalg.norm(Q[:6, :1]))[2] == "exhaustive"


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 7))
def test_row_permutation_invariance(seed, n):
    r = np.random.default_rng(seed)
    k = int(r.integers(1, n))
    Q = haar_orthonormal(r, n, k)
    perm, sigma, _ = select_subset(Q, "exhaustive")
    shuffle = r.permutation(n)
    perm2, sigma2, _ = select_subset(Q[shuffle], "exhaustive")
    assert abs(sigma - sigma2) <= 1e-10
    # the chosen rows map back to a maximising subset of the original
    rows = sorted(shuffle[perm2[:k]])
    assert abs(np.linalg.svd(Q[rows], compute_uv=False)[-1] - sigma) <= 1e-10


def test_lemma_bound_value():
    assert lemma_bound(4, 2) == pytest.approx(1 / math.sqrt(6))
    assert lemma_bound(4, 2) == pytest.approx(0.4082, abs=1e-4)


def test_probe_two_by_one():
    res = probe_lemma(2, 1, 500, seed=1)
    assert res.worst_best_sigma >= 1 / math.sqrt(2) - 1e-12
    assert res.violations == 0


def test_probe_small_run_and_validation():
    res = probe_lemma(6, 3, 300, seed=2)
    assert res.violations == 0 and res.worst_best_sigma >= res.sigma_bound
    assert res.conjecture_bound == pytest.approx(1 / math.sqrt(6))
    with pytest.raises(ValueError):
        probe_lemma(11, 2, 10)
    with pytest.raises(ValueError):
        probe_lemma(4, 4, 10)


def test_haar_columns_orthonormal():
    Q = haar_orthonormal(np.random.default_rng(0), 7, 3)
    np.testing.assert_allclose(Q.T @ Q, np.eye(3), atol=1e-12)


def test_probe_matches_direct_enumeration():
    r = np.random.default_rng(4)
    res = probe_lemma(5, 2, 50, seed=4)
    # recompute with an independent loop over the same draws
    r = np.random.default_rng(4)
    G = r.standard_normal((50, 5, 2))
    worst = np.inf
    for g in G:
        Q, R = np.linalg.qr(g)
        Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
        best = max(np.linalg.svd(Q[list(s)], compute_uv=False)[-1] for s in itertools.combinations(range(5), 2))
        worst = min(worst, best)
    assert res.worst_best_sigma == pytest.approx(worst, abs=1e-12)
