"""Constructive epsilon-rank compression and a probe of the submatrix lemma.

``compress`` replaces an n-term combination ``f = beta . F`` whose Gram
matrix has epsilon-rank p by a p-term combination of a subset of the same
functions. With the Gram eigendecomposition ``M = Q diag(lam) Q^T``, the
leading p eigenvectors ``Q_p`` and a row permutation ``P`` that splits
``P Q`` into a kept block (p rows) and a dropped block (n - p rows),

    V = P Q,  V12 = V[:p, p:],  V22 = V[p:, p:]
    beta_tilde = [I 0] P beta - V12 V22^{-1} [0 I] P beta.

The permutation is chosen so the dropped block of the trailing eigenvectors
is well conditioned. The certificate is ``||beta||^2 (p+1) (n-p)^2 eps``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import SelectionError, ShapeError
from .gram import gram_matrix
from .linalg import sym_eig

__all__ = [
    "CompressionResult",
    "LemmaProbe",
    "EXHAUSTIVE_LIMIT",
    "haar_orthonormal",
    "select_subset",
    "compress",
    "probe_lemma",
    "lemma_bound",
]

EXHAUSTIVE_LIMIT = 10_000


@dataclass
class CompressionResult:
    p: int
    selected_indices: list
    beta_tilde: np.ndarray
    certified_bound: float
    measured_error: float
    v22_min_sigma: float
    proof_bound: float = float("nan")
    lemma_bound: float = float("nan")
    strategy: str = "exhaustive"

    def to_json(self):
        d = asdict(self)
        d["beta_tilde"] = [float(v) for v in self.beta_tilde]
        return json.dumps(d, sort_keys=True)


@dataclass
class LemmaProbe:
    n: int
    p: int
    trials: int
    worst_best_sigma: float
    sigma_bound: float
    conjecture_bound: float
    violations: int = 0

    @property
    def conjecture_holds(self):
        return self.worst_best_sigma >= self.conjecture_bound

    def to_json(self):
        d = asdict(self)
        d["conjecture_holds"] = self.conjecture_holds
        return json.dumps(d, sort_keys=True)


def lemma_bound(n, p):
    """Lower bound 1/sqrt(p(n-p) + min(p, n-p)) on the best subset sigma_min."""
    return 1.0 / math.sqrt(p * (n - p) + min(p, n - p))


def haar_orthonormal(rng, n, p):
    """Haar-distributed n x p matrix with orthonormal columns."""
    G = rng.standard_normal((n, p))
    Q, R = np.linalg.qr(G)
    # fix the sign ambiguity so the law is exactly Haar
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def _subset_sigmas(Q, subsets):
    """sigma_min of ``Q[rows]`` for every row subset, batched."""
    blocks = Q[np.asarray(subsets)]
    return np.linalg.svd(blocks, compute_uv=False)[:, -1]


def _greedy_rows(Q):
    """Pivoted Gram-Schmidt on the rows of ``Q``: k rows with large volume."""
    k = Q.shape[1]
    R = Q.copy()
    rows = []
    for _ in range(k):
        norms = np.einsum("ij,ij->i", R, R)
        norms[rows] = -1.0
        j = int(np.argmax(norms))
        rows.append(j)
        v = R[j] / math.sqrt(max(norms[j], 1e-300))
        R = R - np.outer(R @ v, v)
    return sorted(rows)


def select_subset(Q, strategy="auto"):
    """Row permutation of the orthonormal ``Q`` (n x k) maximising sigma_min.

    The first ``k`` entries of the returned permutation are the rows of the
    best k x k block, the remaining rows follow in increasing order.

    Parameters
    ----------
    Q : ndarray of shape (n, k)
        Orthonormal columns (checked to 1e-8).
    strategy : {"auto", "exhaustive", "greedy"}
        ``auto`` is exhaustive when C(n, k) <= 1e4.

    Returns
    -------
    perm : ndarray of int
    sigma : float
        Smallest singular value of ``Q[perm[:k]]``.
    strategy : str
        The strategy actually used.
    """
    Q = np.asarray(Q, dtype=np.float64)
    if Q.ndim != 2 or Q.shape[1] > Q.shape[0] or Q.shape[1] < 1:
        raise ShapeError(f"expected an n x k matrix with 1 <= k <= n, got {Q.shape}")
    n, k = Q.shape
    if np.abs(Q.T @ Q - np.eye(k)).max() > 1e-8:
        raise ShapeError("columns of Q are not orthonormal to 1e-8")
    if strategy == "auto":
        strategy = "exhaustive" if math.comb(n, k) <= EXHAUSTIVE_LIMIT else "greedy"
    if strategy == "exhaustive":
        subsets = list(itertools.combinations(range(n), k))
        sig = _subset_sigmas(Q, subsets)
        # argmax returns the first maximiser: lexicographically smallest subset
        best = subsets[int(np.argmax(sig))]
    elif strategy == "greedy":
        best = tuple(_greedy_rows(Q))
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    rest = [i for i in range(n) if i not in best]
    perm = np.array(list(best) + rest, dtype=np.intp)
    sigma = float(np.linalg.svd(Q[list(best)], compute_uv=False)[-1])
    return perm, sigma, strategy


def compress(F, beta, grid, epsilon, strategy="auto", method="lapack"):
    """Compress ``f = F @ beta`` onto ``p = r_eps`` of its own functions.

    Parameters
    ----------
    F : ndarray of shape (m, n)
        Function values on the grid points, one column per function.
    beta : ndarray of shape (n,)
    grid : QuadratureGrid
    epsilon : float
    strategy : str
        Subset search passed to :func:`select_subset`.

    Returns
    -------
    CompressionResult
    """
    F = np.asarray(F, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if F.ndim != 2 or F.shape[1] != beta.size:
        raise ShapeError(f"F has shape {F.shape} but beta has {beta.size} entries")
    if not np.all(np.isfinite(beta)):
        raise ShapeError("beta must be finite")
    n = beta.size
    M = gram_matrix(F, grid)
    lam, Q = sym_eig(M, method=method)
    p = int(np.sum(np.maximum(lam, 0.0) > epsilon))
    C = float(beta @ beta)
    proof = C * (p + 1) * (n - p) ** 2 * epsilon
    if p == n:
        return CompressionResult(n, list(range(n)), beta.copy(), proof, 0.0, float("nan"),
                                 proof, C * (n - p) * (p * (n - p) + min(p, n - p)) * epsilon, "identity")
    if p == 0:
        raise SelectionError("epsilon-rank is zero; nothing to keep")
    # V22 is the dropped-row block of the trailing eigenvectors, so pick the
    # n - p rows of Q[:, p:] with the best-conditioned square block.
    tail = Q[:, p:]
    drop_perm, sigma, used = select_subset(tail, strategy)
    dropped = drop_perm[: n - p]
    kept = np.array(sorted(set(range(n)) - set(dropped.tolist())), dtype=np.intp)
    perm = np.concatenate([kept, np.sort(dropped)])
    V = Q[perm]
    V12, V22 = V[:p, p:], V[p:, p:]
    if sigma < 1e-14:
        raise SelectionError(f"V22 is numerically singular (sigma_min = {sigma:.3e}) for every candidate subset")
    Pb = beta[perm]
    beta_tilde = Pb[:p] - V12 @ np.linalg.solve(V22, Pb[p:])
    diff = F[:, kept] @ beta_tilde - F @ beta
    err = max(float(grid.integrate(diff * diff)), 0.0)
    lemma = C * (n - p) * (p * (n - p) + min(p, n - p)) * epsilon
    return CompressionResult(p, kept.tolist(), beta_tilde, proof, err, sigma, proof, lemma, used)


def probe_lemma(n, p, trials, seed=0, batch=2000):
    """Sample Haar ``Q`` (n x p) and record the worst best-subset sigma_min."""
    if not (1 <= p < n <= 10):
        raise ValueError("need 1 <= p < n <= 10")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    subsets = np.array(list(itertools.combinations(range(n), p)))
    bound = lemma_bound(n, p)
    worst, violations, done = np.inf, 0, 0
    while done < trials:
        b = min(batch, trials - done)
        G = rng.standard_normal((b, n, p))
        Qs, Rs = np.linalg.qr(G)
        Qs = Qs * np.where(np.diagonal(Rs, axis1=1, axis2=2) < 0, -1.0, 1.0)[:, None, :]
        blocks = Qs[:, subsets]  # (b, S, p, p)
        sig = np.linalg.svd(blocks, compute_uv=False)[..., -1]
        best = sig.max(axis=1)
        violations += int(np.sum(best < bound - 1e-10))
        worst = min(worst, float(best.min()))
        done += b
    return LemmaProbe(n, p, trials, worst, bound, 1.0 / math.sqrt(n), violations)
