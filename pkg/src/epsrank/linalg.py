"""Dense symmetric eigendecomposition and truncated least squares.

Matrices are plain ``float64`` numpy arrays; :func:`as_matrix` is the single
entry point that enforces shape and finiteness.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .exceptions import ConvergenceError, DomainError, ShapeError

__all__ = ["SymEigResult", "as_matrix", "sym_eig", "jacobi_eig", "truncated_lstsq"]

_SYMMETRY_RTOL = 1e-12


class SymEigResult(NamedTuple):
    """Eigenvalues sorted descending with column-aligned eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name="matrix"):
    """Return ``a`` as a finite 2-D float64 array or raise."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def _check_symmetric(M):
    M = as_matrix(M, "M")
    n, k = M.shape
    if n != k:
        raise ShapeError(f"M must be square, got {M.shape}")
    if n == 0:
        raise ShapeError("M must have dimension >= 1")
    scale = max(np.abs(M).max(), np.finfo(float).tiny)
    if np.abs(M - M.T).max() > _SYMMETRY_RTOL * scale:
        raise ShapeError("M is not symmetric")
    return 0.5 * (M + M.T)


def _round_robin(n):
    """Disjoint index pairings covering every (p, q) once per sweep.

    Odd ``n`` gets a bye slot (-1) so that one index rests each round.
    """
    players = list(range(n)) + ([-1] if n % 2 else [])
    m = len(players)
    rounds = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        pairs = [(min(p, q), max(p, q)) for p, q in pairs if p >= 0 and q >= 0]
        if pairs:
            p, q = np.array(pairs, dtype=np.intp).T
            rounds.append((p, q))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eig(M, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigensolver with round-robin (parallel) ordering.

    Each round rotates a set of disjoint (p, q) pairs at once; the rotations
    commute, so a round is one vectorised similarity transform. The result is
    deterministic for a fixed input.
    """
    A = _check_symmetric(M).copy()
    n = A.shape[0]
    V = np.eye(n)
    target = tol * np.linalg.norm(A)
    rounds = _round_robin(n)

    mask = ~np.eye(n, dtype=bool)

    def off_norm(X):
        return np.sqrt(np.sum(X[mask] ** 2))

    for _ in range(max_sweeps):
        if off_norm(A) <= target:
            break
        for p, q in rounds:
            apq = A[p, q]
            active = np.abs(apq) > 0.0
            if not active.any():
                continue
            app, aqq = A[p, p], A[q, q]
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                theta = np.where(active, (aqq - app) / (2.0 * np.where(active, apq, 1.0)), 0.0)
                t = np.where(
                    active,
                    np.sign(theta + (theta == 0)) / (np.abs(theta) + np.sqrt(theta * theta + 1.0)),
                    0.0,
                )
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            # A <- J^T A J, columns first then rows
            Ap, Aq = A[:, p], A[:, q]
            A[:, p], A[:, q] = c * Ap - s * Aq, s * Ap + c * Aq
            Ap, Aq = A[p, :], A[q, :]
            A[p, :], A[q, :] = c[:, None] * Ap - s[:, None] * Aq, s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p], V[:, q]
            V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq
    else:
        if off_norm(A) > target:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
    return np.diag(A).copy(), V


def sym_eig(M, method="jacobi"):
    """Full spectrum of a symmetric matrix.

    Parameters
    ----------
    M : array_like, shape (n, n)
        Symmetric matrix; asymmetry above 1e-12 relative is rejected.
    method : {"jacobi", "lapack"}
        ``"jacobi"`` is the in-house cyclic Jacobi solver; ``"lapack"``
        delegates to :func:`numpy.linalg.eigh`.

    Returns
    -------
    SymEigResult
        Eigenvalues descending. Each eigenvector is sign-normalised so that
        its largest-magnitude entry is positive.
    """
    if method == "jacobi":
        w, V = jacobi_eig(M)
    elif method == "lapack":
        w, V = np.linalg.eigh(_check_symmetric(M))
    else:
        raise DomainError(f"unknown eigensolver {method!r}")
    order = np.argsort(-w, kind="stable")
    w, V = w[order], V[:, order]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    return SymEigResult(w, V * signs)


def truncated_lstsq(A, b, trunc_tol=0.0):
    """Minimum-norm least-squares solution with relative singular value cutoff.

    Singular values ``s <= trunc_tol * s_max`` are discarded (exact zeros are
    always discarded).
    """
    A = as_matrix(A, "A")
    b = np.asarray(b, dtype=np.float64)
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise ShapeError(f"A must be non-empty, got {A.shape}")
    if b.ndim != 1 or b.shape[0] != A.shape[0]:
        raise ShapeError(f"b has shape {b.shape}, expected ({A.shape[0]},)")
    if trunc_tol < 0:
        raise DomainError("trunc_tol must be >= 0")
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(A.shape[1])
    keep = s > trunc_tol * s[0]
    coef = (U[:, keep].T @ b) / s[keep]
    return Vt[keep].T @ coef
