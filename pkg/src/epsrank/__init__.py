"""Epsilon-rank of hidden-layer neuron functions: measurement, training and initialisation."""
from .estimators import PINNRegressor, StaircaseRegressor
from .gram import EpsilonRank, GramSpectrum, QuadratureGrid, build_grid, eps_rank, gram_matrix
from .initializers import UdiConfig, grid_init_1d, initialize, udi_init, xavier_init
from .linalg import sym_eig, truncated_lstsq
from .net import Network, forward, input_derivatives, layer_features, param_gradient, predict
from .rfm import RandomFeatureRegressor
from .theory import compress, probe_lemma, select_subset
from .train import OptimizerState, train_run

__version__ = "0.1.0"

__all__ = [
    "EpsilonRank",
    "GramSpectrum",
    "Network",
    "OptimizerState",
    "PINNRegressor",
    "QuadratureGrid",
    "RandomFeatureRegressor",
    "StaircaseRegressor",
    "UdiConfig",
    "build_grid",
    "compress",
    "eps_rank",
    "forward",
    "gram_matrix",
    "grid_init_1d",
    "initialize",
    "input_derivatives",
    "layer_features",
    "param_gradient",
    "predict",
    "probe_lemma",
    "select_subset",
    "sym_eig",
    "train_run",
    "truncated_lstsq",
    "udi_init",
    "xavier_init",
]
