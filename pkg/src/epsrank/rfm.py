"""Random feature method (RFM) and extreme learning machine (ELM).

The box domain is split into ``cells_per_dim ** d`` congruent cells with
indicator partition-of-unity functions; every cell carries its own random
tanh features

    phi_ij(x) = tanh(gamma * (a_ij . xl + b_ij)),

where ``xl`` is ``x`` mapped to the cell-local box [-1, 1]^d, ``a_ij`` is
uniform on the unit sphere and ``b_ij ~ U(-1, 1)``. One cell is the ELM.
Cells are half-open on their upper faces except at the domain's upper
boundary, so every point belongs to exactly one cell and features from
different cells are exactly orthogonal under any point quadrature.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .exceptions import ConfigError, ShapeError
from .gram import eps_rank, gram_matrix
from .linalg import truncated_lstsq

__all__ = [
    "Partition",
    "RandomFeatureModel",
    "build_model",
    "fit",
    "model_rank_and_error",
    "compare",
    "RandomFeatureRegressor",
]


@dataclass(frozen=True)
class Partition:
    domain: tuple
    cells_per_dim: int

    @property
    def dim(self):
        return len(self.domain)

    @property
    def n_cells(self):
        return self.cells_per_dim**self.dim

    def _bounds(self):
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        return lo, hi

    def cell_index(self, X):
        """Flat cell index of each point (row-major over per-axis indices)."""
        lo, hi = self._bounds()
        M = self.cells_per_dim
        idx = np.floor((X - lo) / (hi - lo) * M).astype(np.intp)
        idx = np.clip(idx, 0, M - 1)
        flat = np.zeros(X.shape[0], dtype=np.intp)
        for k in range(self.dim):
            flat = flat * M + idx[:, k]
        return flat

    def cell_boxes(self):
        lo, hi = self._bounds()
        M = self.cells_per_dim
        h = (hi - lo) / M
        boxes = []
        for flat in range(self.n_cells):
            ijk, rem = [], flat
            for _ in range(self.dim):
                ijk.append(rem % M)
                rem //= M
            ijk = np.array(ijk[::-1])
            boxes.append((lo + ijk * h, lo + (ijk + 1) * h))
        return boxes

    def pou(self, X):
        """Indicator PoU values, shape ``(m, n_cells)``; rows sum to one."""
        out = np.zeros((X.shape[0], self.n_cells))
        out[np.arange(X.shape[0]), self.cell_index(X)] = 1.0
        return out


@dataclass(frozen=True)
class RandomFeatureModel:
    partition: Partition
    directions: np.ndarray  # (n_cells, J, d)
    offsets: np.ndarray  # (n_cells, J)
    gamma: float
    coefficients: np.ndarray  # (n_cells * J,)

    @property
    def features_per_cell(self):
        return self.offsets.shape[1]

    @property
    def n_features(self):
        return self.offsets.size

    @property
    def is_elm(self):
        return self.partition.n_cells == 1

    def design_matrix(self, X):
        """PoU-weighted features, shape ``(m, n_features)``; cell-major columns."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.partition.dim:
            raise ShapeError(f"points have shape {X.shape}, model dimension is {self.partition.dim}")
        J = self.features_per_cell
        cells = self.partition.cell_index(X)
        out = np.zeros((X.shape[0], self.n_features))
        for c, (lo, hi) in enumerate(self.partition.cell_boxes()):
            rows = np.flatnonzero(cells == c)
            if rows.size == 0:
                continue
            local = 2.0 * (X[rows] - lo) / (hi - lo) - 1.0
            z = local @ self.directions[c].T + self.offsets[c]
            out[np.ix_(rows, np.arange(c * J, (c + 1) * J))] = np.tanh(self.gamma * z)
        return out

    def predict(self, X):
        return self.design_matrix(X) @ self.coefficients


def build_model(domain, cells_per_dim, features_per_cell, gamma=1.0, seed=0):
    """Random features with zero coefficients; ``cells_per_dim=1`` is an ELM."""
    if cells_per_dim < 1:
        raise ConfigError("cells_per_dim must be >= 1")
    if features_per_cell < 1:
        raise ConfigError("features_per_cell must be >= 1")
    domain = tuple((float(a), float(b)) for a, b in domain)
    part = Partition(domain, int(cells_per_dim))
    rng = np.random.default_rng(seed)
    d, J = part.dim, int(features_per_cell)
    g = rng.standard_normal((part.n_cells, J, d))
    norms = np.linalg.norm(g, axis=2, keepdims=True)
    # a zero Gaussian draw has probability zero; guard anyway
    norms[norms < 1e-12] = 1.0
    directions = g / norms
    offsets = rng.uniform(-1.0, 1.0, (part.n_cells, J))
    return RandomFeatureModel(part, directions, offsets, float(gamma), np.zeros(part.n_cells * J))


def fit(model, target, collocation, trunc_tol=1e-12):
    """Least-squares coefficients at the collocation points.

    Returns ``(fitted_model, residual_norm)``; the residual is the Euclidean
    norm of the pointwise misfit.
    """
    X = collocation.points if hasattr(collocation, "points") else np.asarray(collocation)
    A = model.design_matrix(X)
    b = target(X) if callable(target) else np.asarray(target, dtype=np.float64)
    if X.shape[0] < model.n_features:
        import warnings

        warnings.warn(
            f"{X.shape[0]} collocation points for {model.n_features} features; system is underdetermined",
            stacklevel=2,
        )
    coef = truncated_lstsq(A, b, trunc_tol)
    return replace(model, coefficients=coef), float(np.linalg.norm(A @ coef - b))


def model_rank_and_error(model, target, eval_grid, epsilon=1e-12, method="jacobi"):
    """Epsilon-rank of the feature Gram and absolute / relative L2 errors."""
    X = eval_grid.points
    D = model.design_matrix(X)
    spectrum = eps_rank(gram_matrix(D, eval_grid), epsilon, method)
    exact = target(X)
    diff = D @ model.coefficients - exact
    err = np.sqrt(eval_grid.integrate(diff * diff))
    norm = np.sqrt(eval_grid.integrate(exact * exact))
    return spectrum.eps_rank, float(err), float(err / norm) if norm > 0 else float("inf")


def compare(domain, target, collocation, eval_grid, total_features, cells_per_dim,
            gamma=1.0, trunc_tol=1e-12, epsilon=1e-12, seed=0, method="jacobi"):
    """Fit an ELM and an RFM with equal feature budgets and report both.

    Returns a list of dicts with keys ``method``, ``features``, ``cells``,
    ``eps_rank``, ``l2_error``, ``rel_l2_error``, ``solve_seconds``.
    ``method`` picks the Gram eigensolver.
    """
    n_cells = cells_per_dim ** len(domain)
    if total_features % n_cells:
        raise ConfigError(f"{total_features} features do not split evenly over {n_cells} cells")
    rows = []
    for name, cpd, per_cell in (("ELM", 1, total_features), ("RFM", cells_per_dim, total_features // n_cells)):
        model = build_model(domain, cpd, per_cell, gamma, seed)
        t0 = time.perf_counter()
        model, _ = fit(model, target, collocation, trunc_tol)
        elapsed = time.perf_counter() - t0
        rank, err, rel = model_rank_and_error(model, target, eval_grid, epsilon, method)
        rows.append({
            "method": name,
            "features": model.n_features,
            "cells": model.partition.n_cells,
            "eps_rank": rank,
            "l2_error": err,
            "rel_l2_error": rel,
            "solve_seconds": elapsed,
        })
    return rows


class RandomFeatureRegressor(BaseEstimator, RegressorMixin):
    """Scikit-learn regressor backed by :class:`RandomFeatureModel`.

    Parameters
    ----------
    cells_per_dim : int, default=1
        Subdomains per axis; 1 gives an extreme learning machine.
    features_per_cell : int, default=100
    gamma : float, default=1.0
        Shape parameter of the tanh features.
    trunc_tol : float, default=1e-12
        Relative singular value cutoff of the least-squares solve.
    domain : sequence of (low, high), optional
        Defaults to the bounding box of the training inputs.
    random_state : int, default=0
    """

    def __init__(self, cells_per_dim=1, features_per_cell=100, gamma=1.0, trunc_tol=1e-12,
                 domain=None, random_state=0):
        self.cells_per_dim = cells_per_dim
        self.features_per_cell = features_per_cell
        self.gamma = gamma
        self.trunc_tol = trunc_tol
        self.domain = domain
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        domain = self.domain
        if domain is None:
            domain = list(zip(X.min(axis=0), X.max(axis=0)))
        model = build_model(domain, self.cells_per_dim, self.features_per_cell, self.gamma, self.random_state)
        self.model_, self.residual_ = fit(model, y, X, self.trunc_tol)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict(check_array(X))

    def eps_rank(self, grid, epsilon=1e-12):
        check_is_fitted(self, "model_")
        return eps_rank(gram_matrix(self.model_.design_matrix(grid.points), grid), epsilon).eps_rank
