"""Quadrature grids, discrete Gram matrices and the epsilon-rank.

The Gram matrix of functions sampled as the columns of ``D`` (one row per
quadrature node) is ``M = D^T W D`` with ``W = diag(weights)``; the
epsilon-rank counts eigenvalues of ``M`` strictly greater than ``epsilon``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import DomainError, ShapeError
from .linalg import as_matrix, sym_eig

__all__ = [
    "DEFAULT_EPSILON",
    "SCHEMES",
    "QuadratureGrid",
    "GramSpectrum",
    "EpsilonRank",
    "build_grid",
    "gram_matrix",
    "eps_rank",
    "layer_rank_profile",
]

DEFAULT_EPSILON = 1e-6
SCHEMES = ("trapezoid", "gauss", "uniform-mesh", "monte-carlo")
# tensor-product schemes beyond this dimension blow up; use monte-carlo
_MAX_MESH_DIM = 3


@dataclass(frozen=True)
class QuadratureGrid:
    points: np.ndarray  # (m, d)
    weights: np.ndarray  # (m,)
    scheme: str
    domain: tuple  # ((a_1, b_1), ..., (a_d, b_d))

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    @property
    def volume(self):
        return float(np.prod([b - a for a, b in self.domain]))

    def integrate(self, values):
        values = np.asarray(values, dtype=np.float64)
        if self.scheme == "monte-carlo":
            # |domain| * sample mean: exact for constants
            return self.volume * float(values.mean())
        return float(values @ self.weights)


def _normalise_domain(domain):
    dom = np.asarray(domain, dtype=np.float64)
    if dom.ndim == 1 and dom.shape == (2,):
        dom = dom[None, :]
    if dom.ndim != 2 or dom.shape[1] != 2 or dom.shape[0] < 1:
        raise ShapeError(f"domain must be a list of (low, high) pairs, got {domain!r}")
    if not np.all(dom[:, 1] > dom[:, 0]):
        raise DomainError("each domain interval needs high > low")
    return tuple((float(a), float(b)) for a, b in dom)


def _rule_1d(scheme, a, b, m):
    if scheme == "trapezoid":
        x = np.linspace(a, b, m)
        h = (b - a) / (m - 1)
        w = np.full(m, h)
        w[[0, -1]] = h / 2
    elif scheme == "gauss":
        t, w = np.polynomial.legendre.leggauss(m)
        x = 0.5 * (b - a) * t + 0.5 * (a + b)
        w = 0.5 * (b - a) * w
    else:  # uniform-mesh: cell midpoints
        h = (b - a) / m
        x = a + h * (np.arange(m) + 0.5)
        w = np.full(m, h)
    return x, w


def build_grid(domain, scheme="trapezoid", m=129, seed=None):
    """Quadrature nodes and weights on an axis-aligned box.

    Parameters
    ----------
    domain : sequence of (low, high)
        One interval per input dimension; a bare ``(low, high)`` means 1-D.
    scheme : {"trapezoid", "gauss", "uniform-mesh", "monte-carlo"}
        Tensor-product schemes use ``m`` nodes per dimension; ``monte-carlo``
        draws ``m`` points in total with equal weights ``|domain| / m``.
    m : int
    seed : int, optional
        Required for ``monte-carlo``.

    Returns
    -------
    QuadratureGrid
        Tensor grids are ordered with the last coordinate varying fastest.
    """
    dom = _normalise_domain(domain)
    d = len(dom)
    if scheme not in SCHEMES:
        raise DomainError(f"unknown quadrature scheme {scheme!r}; choose from {SCHEMES}")
    if scheme == "monte-carlo":
        if seed is None:
            raise DomainError("monte-carlo grids need a seed")
        if m < 1:
            raise DomainError("monte-carlo needs m >= 1")
        rng = np.random.default_rng(seed)
        lo = np.array([a for a, _ in dom])
        hi = np.array([b for _, b in dom])
        pts = lo + (hi - lo) * rng.random((m, d))
        vol = float(np.prod(hi - lo))
        return QuadratureGrid(pts, np.full(m, vol / m), scheme, dom)
    if m < 2:
        raise DomainError(f"{scheme} needs at least 2 nodes per dimension")
    if d > _MAX_MESH_DIM:
        raise DomainError(f"{scheme} grids support d <= {_MAX_MESH_DIM}; use monte-carlo")
    rules = [_rule_1d(scheme, a, b, m) for a, b in dom]
    axes = np.meshgrid(*[x for x, _ in rules], indexing="ij")
    waxes = np.meshgrid(*[w for _, w in rules], indexing="ij")
    pts = np.stack([ax.ravel() for ax in axes], axis=1)
    w = np.prod(np.stack([wx.ravel() for wx in waxes], axis=1), axis=1)
    return QuadratureGrid(pts, w, scheme, dom)


def gram_matrix(D, grid):
    """``D^T W D`` for feature samples ``D`` (rows aligned with ``grid`` nodes)."""
    weights = grid.weights if isinstance(grid, QuadratureGrid) else np.asarray(grid, dtype=np.float64)
    D = as_matrix(D, "D")
    if D.shape[0] != weights.shape[0]:
        raise ShapeError(f"D has {D.shape[0]} rows but the grid has {weights.shape[0]} nodes")
    M = D.T @ (weights[:, None] * D)
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class GramSpectrum:
    eigenvalues: np.ndarray
    epsilon: float
    eps_rank: int

    def to_json(self):
        return json.dumps(
            {"epsilon": self.epsilon, "eigenvalues": self.eigenvalues.tolist(), "eps_rank": self.eps_rank}
        )

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(np.asarray(data["eigenvalues"], dtype=np.float64), float(data["epsilon"]), int(data["eps_rank"]))


def eps_rank(M, epsilon=DEFAULT_EPSILON, method="jacobi"):
    """Spectrum of a Gram matrix and the number of eigenvalues ``> epsilon``.

    Round-off negatives are clamped to zero before counting.
    """
    if epsilon < 0:
        raise DomainError("epsilon must be >= 0")
    lam = np.maximum(sym_eig(M, method=method).eigenvalues, 0.0)
    return GramSpectrum(lam, float(epsilon), int(np.count_nonzero(lam > epsilon)))


def layer_rank_profile(net, grid, epsilon=DEFAULT_EPSILON, method="jacobi"):
    """Epsilon-rank of every hidden layer's neuron functions, first to last."""
    if grid.dim != net.input_dim:
        raise ShapeError(f"grid dimension {grid.dim} != network input dimension {net.input_dim}")
    ranks = []
    Y = grid.points
    for W, b in zip(net.weights, net.biases):
        Y = net.act.f(Y @ W.T + b)
        ranks.append(eps_rank(gram_matrix(Y, grid), epsilon, method).eps_rank)
    return ranks


class EpsilonRank(BaseEstimator):
    """Estimator wrapper: fit on sampled features, read ``eps_rank_``.

    ``sample_weight`` carries the quadrature weights; without it every row
    has weight one.

    >>> import numpy as np
    >>> est = EpsilonRank(epsilon=1e-6).fit(np.eye(3))
    >>> est.eps_rank_
    3
    """

    def __init__(self, epsilon=DEFAULT_EPSILON, method="jacobi"):
        self.epsilon = epsilon
        self.method = method

    def fit(self, X, y=None, sample_weight=None):
        X = check_array(X)
        w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=np.float64)
        self.gram_ = gram_matrix(X, w)
        spectrum = eps_rank(self.gram_, self.epsilon, self.method)
        self.eigenvalues_ = spectrum.eigenvalues
        self.eps_rank_ = spectrum.eps_rank
        self.n_features_in_ = X.shape[1]
        return self

    def score(self, X=None, y=None, sample_weight=None):
        """The fitted epsilon-rank (refits first if ``X`` is given)."""
        if X is not None:
            self.fit(X, sample_weight=sample_weight)
        check_is_fitted(self, "eps_rank_")
        return self.eps_rank_
