"""Scikit-learn wrappers around the training loop."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .gram import DEFAULT_EPSILON, build_grid
from .initializers import initialize
from .net import Network, predict
from .tasks import FitTask, LossTerm, _value_residual, make_task
from .train import OptimizerState, train_run

__all__ = ["StaircaseRegressor", "PINNRegressor"]


class _DataTask(FitTask):
    """Fit task over user-supplied samples."""

    def __init__(self, X, y):
        domain = tuple(zip(X.min(axis=0).tolist(), X.max(axis=0).tolist()))
        super().__init__("fit1d" if X.shape[1] == 1 else "fit2d", domain)
        self._X, self._y = X, y

    def sample(self, seed=None):
        return {"train": self._X}

    def loss_terms(self, samples):
        return [LossTerm("mse", samples["train"], _value_residual(self._y))]


class _NetworkMixin:
    def _init_network(self, d, domain):
        net = Network.zeros(d, self.depth, self.width, self.activation)
        return initialize(net, self.init, self.random_state, gamma=self.gamma, domain=domain)

    def _rank_grid(self, domain):
        if self.rank_grid_points is None:
            return None
        return build_grid(domain, "trapezoid", self.rank_grid_points)

    def _store(self, result):
        if result.aborted:
            raise FloatingPointError(result.message)
        self.network_ = result.network
        self.trajectory_ = result.records
        self.loss_history_ = result.loss_history
        self.final_loss_ = result.final_loss
        self.eps_rank_history_ = np.array([r.eps_rank for r in result.records])

    def predict(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X)
        return predict(self.network_, X)


class StaircaseRegressor(_NetworkMixin, RegressorMixin, BaseEstimator):
    """Full-batch MLP regressor that records the epsilon-rank while training.

    Parameters
    ----------
    depth, width : int
        Hidden layers and neurons per layer.
    activation : str, default="tanh"
    init : {"xavier", "grid", "udi"}
    gamma : float
        UDI shape parameter.
    steps : int
        Adam updates.
    learning_rate : float
    rank_every : int
        Rank measurement cadence.
    rank_grid_points : int or None
        Trapezoid nodes per axis for the Gram matrix; None skips ranks.
    epsilon : float
    random_state : int

    Attributes
    ----------
    network_ : Network
    trajectory_ : list of TrajectoryRecord
    eps_rank_history_ : ndarray
    loss_history_ : ndarray
    final_loss_ : float
    """

    def __init__(self, depth=2, width=50, activation="tanh", init="xavier", gamma=2.0, steps=1000,
                 learning_rate=1e-3, rank_every=100, rank_grid_points=129, epsilon=DEFAULT_EPSILON,
                 random_state=0):
        self.depth = depth
        self.width = width
        self.activation = activation
        self.init = init
        self.gamma = gamma
        self.steps = steps
        self.learning_rate = learning_rate
        self.rank_every = rank_every
        self.rank_grid_points = rank_grid_points
        self.epsilon = epsilon
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        task = _DataTask(X, y.astype(np.float64))
        net = self._init_network(X.shape[1], task.domain)
        res = train_run(net, task, OptimizerState(lr=self.learning_rate), self.steps, self.rank_every,
                        self._rank_grid(task.domain), self.epsilon, self.random_state)
        self._store(res)
        self.n_features_in_ = X.shape[1]
        return self


class PINNRegressor(_NetworkMixin, RegressorMixin, BaseEstimator):
    """Physics-informed network for one of the built-in PDE tasks.

    ``fit`` ignores its arguments beyond validation; the task defines the
    collocation sets. ``score(X, y)`` compares ``predict`` with reference
    values, for example ``task_.exact(X)``.
    """

    def __init__(self, task="poisson2d", depth=2, width=50, activation="tanh", init="xavier", gamma=1.0,
                 steps=1000, learning_rate=1e-3, mu_bc=None, mu_ic=1.0, counts=None, rank_every=100,
                 rank_grid_points=None, epsilon=DEFAULT_EPSILON, random_state=0):
        self.task = task
        self.depth = depth
        self.width = width
        self.activation = activation
        self.init = init
        self.gamma = gamma
        self.steps = steps
        self.learning_rate = learning_rate
        self.mu_bc = mu_bc
        self.mu_ic = mu_ic
        self.counts = counts
        self.rank_every = rank_every
        self.rank_grid_points = rank_grid_points
        self.epsilon = epsilon
        self.random_state = random_state

    def fit(self, X=None, y=None):
        task = make_task(self.task, self.counts, self.mu_bc, self.mu_ic)
        net = self._init_network(task.dim, task.domain)
        res = train_run(net, task, OptimizerState(lr=self.learning_rate), self.steps, self.rank_every,
                        self._rank_grid(task.domain), self.epsilon, self.random_state)
        self.task_ = task
        self._store(res)
        self.n_features_in_ = task.dim
        return self
