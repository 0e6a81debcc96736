"""First-layer initialisation schemes.

* ``xavier_init``: every parameter i.i.d. U(-1/sqrt(n), 1/sqrt(n)), n the
  hidden width.
* ``grid_init_1d``: neuron j of the first layer becomes
  tanh(n/2 (x - x_j)) with x_j = -1 + 2(j-1)/n.
* ``udi_init``: neuron j becomes tanh(gamma (a_j . x + b_j)) with a_j uniform
  on the unit sphere and b_j ~ U(0, R).

Grid and UDI only touch the first hidden layer. Each layer draws from its own
stream keyed by (seed, layer index), so deeper layers are identical whichever
first-layer scheme is used.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError

__all__ = [
    "INITIALIZERS",
    "UdiConfig",
    "xavier_init",
    "grid_init_1d",
    "grid_nodes",
    "udi_init",
    "default_offset_range",
    "initialize",
]

INITIALIZERS = ("xavier", "grid", "udi")
_UDI_STREAM = 7919


@dataclass(frozen=True)
class UdiConfig:
    gamma: float = 2.0
    R: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (self.gamma > 0 and self.R > 0):
            raise DomainError("UDI needs gamma > 0 and R > 0")


def _layer_rng(seed, layer):
    return np.random.default_rng([int(seed), int(layer)])


def xavier_init(net, seed):
    """Uniform U(-1/sqrt(n), 1/sqrt(n)) for all weights, biases and beta."""
    out = net.copy()
    bound = 1.0 / np.sqrt(net.width)
    for k, (W, b) in enumerate(zip(out.weights, out.biases)):
        rng = _layer_rng(seed, k)
        W[...] = rng.uniform(-bound, bound, W.shape)
        b[...] = rng.uniform(-bound, bound, b.shape)
    rng = _layer_rng(seed, net.depth)
    out.beta[...] = rng.uniform(-bound, bound, out.beta.shape)
    return out


def grid_nodes(n):
    return -1.0 + 2.0 * np.arange(n) / n


def grid_init_1d(net):
    """Deterministic finite-element-like first layer on [-1, 1]."""
    if net.input_dim != 1:
        raise DomainError("grid initialisation is defined for 1-D inputs only")
    if net.activation != "tanh":
        raise DomainError("grid initialisation assumes tanh neurons")
    n = net.width
    out = net.copy()
    out.weights[0][:, 0] = n / 2.0
    out.biases[0][:] = -(n / 2.0) * grid_nodes(n)
    return out


def _unit_directions(rng, n, d):
    dirs = np.empty((n, d))
    for j in range(n):
        while True:
            g = rng.standard_normal(d)
            norm = np.linalg.norm(g)
            if norm >= 1e-12:
                break
        dirs[j] = g / norm
    return dirs


def udi_init(net, cfg):
    """Uniform distribution initialisation of the first hidden layer."""
    if net.activation != "tanh":
        raise DomainError("UDI assumes tanh neurons")
    rng = np.random.default_rng([int(cfg.seed), _UDI_STREAM])
    a = _unit_directions(rng, net.width, net.input_dim)
    offsets = rng.uniform(0.0, cfg.R, net.width)
    out = net.copy()
    out.weights[0][...] = cfg.gamma * a
    out.biases[0][...] = cfg.gamma * offsets
    return out


def default_offset_range(domain):
    """Largest Euclidean norm over the box, i.e. the farthest corner."""
    dom = np.asarray(domain, dtype=np.float64).reshape(-1, 2)
    return float(np.linalg.norm(np.abs(dom).max(axis=1)))


def initialize(net, scheme="xavier", seed=0, gamma=2.0, R=None, domain=None):
    """Xavier everywhere, then optionally overwrite the first layer."""
    out = xavier_init(net, seed)
    if scheme == "xavier":
        return out
    if scheme == "grid":
        return grid_init_1d(out)
    if scheme == "udi":
        if R is None:
            if domain is None:
                raise DomainError("UDI needs R or the domain to derive it from")
            R = default_offset_range(domain)
        return udi_init(out, UdiConfig(gamma=gamma, R=R, seed=seed))
    raise DomainError(f"unknown initializer {scheme!r}; choose from {INITIALIZERS}")
