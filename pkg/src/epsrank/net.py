"""Fully connected tanh-family networks written directly in numpy.

The network is

    y_0 = x,  y_{k+1} = act(W_k y_k + b_k)  (k = 0..L-1),  y = beta . y_L

with a uniform hidden width ``n``.  Besides plain evaluation this module
provides exact reverse-mode parameter gradients of losses that may depend on
first and second input derivatives of ``y`` (the PINN case).  Input
derivatives are carried forward layer by layer as (value, Jacobian,
Hessian-entry) triples; the reverse pass differentiates through that
forward-mode computation.

Flat parameter order is ``W_0`` (row-major), ``b_0``, ``W_1``, ``b_1``, ...,
``beta``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .exceptions import DomainError, NumericError, ShapeError, UnsupportedActivationError

__all__ = [
    "ACTIVATIONS",
    "Activation",
    "Network",
    "NetworkOutput",
    "OutputSeeds",
    "forward",
    "layer_features",
    "param_gradient",
    "value_and_gradient",
    "input_derivatives",
    "save_network",
    "load_network",
]

CHECKPOINT_MAGIC = "EPSRANK-NET"
CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# activations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Activation:
    """An activation and its first three derivatives.

    ``smooth`` is False when second derivatives are not meaningful (relu).
    """

    name: str
    f: Callable
    d1: Callable
    d2: Callable
    d3: Callable
    smooth: bool = True
    fused: Callable | None = None

    def derivatives(self, z, order):
        """``[f, d1, ..., d_order](z)``, sharing work where the activation allows."""
        if self.fused is not None:
            return self.fused(z, order)
        return [g(z) for g in (self.f, self.d1, self.d2, self.d3)[: order + 1]]


def _tanh_d1(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _tanh_d2(z):
    t = np.tanh(z)
    return -2.0 * t * (1.0 - t * t)


def _tanh_d3(z):
    t = np.tanh(z)
    return (1.0 - t * t) * (6.0 * t * t - 2.0)


def _tanh_fused(z, order):
    t = np.tanh(z)
    out = [t]
    if order >= 1:
        d1 = 1.0 - t * t
        out.append(d1)
    if order >= 2:
        out.append(-2.0 * t * d1)
    if order >= 3:
        out.append(d1 * (6.0 * t * t - 2.0))
    return out


def _sigmoid(z):
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_d1(z):
    s = _sigmoid(z)
    return s * (1.0 - s)


def _sigmoid_d2(z):
    s = _sigmoid(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


def _sigmoid_d3(z):
    s = _sigmoid(z)
    return s * (1.0 - s) * (1.0 - 6.0 * s + 6.0 * s * s)


def _relu_d1(z):
    return (z > 0).astype(np.float64)


def _no_d2(z):
    raise UnsupportedActivationError("relu has no second derivative")


def _elu_family(alpha):
    def f(z):
        return np.where(z > 0, z, alpha * np.expm1(np.minimum(z, 0.0)))

    def d1(z):
        return np.where(z > 0, 1.0, alpha * np.exp(np.minimum(z, 0.0)))

    def d2(z):
        return np.where(z > 0, 0.0, alpha * np.exp(np.minimum(z, 0.0)))

    return f, d1, d2, d2


ACTIVATIONS = ("tanh", "relu", "elu", "cosine", "sigmoid")


def make_activation(name, elu_alpha=1.0):
    if name == "tanh":
        return Activation("tanh", np.tanh, _tanh_d1, _tanh_d2, _tanh_d3, fused=_tanh_fused)
    if name == "sigmoid":
        return Activation("sigmoid", _sigmoid, _sigmoid_d1, _sigmoid_d2, _sigmoid_d3)
    if name == "cosine":
        return Activation(
            "cosine", np.cos, lambda z: -np.sin(z), lambda z: -np.cos(z), np.sin
        )
    if name == "elu":
        return Activation("elu", *_elu_family(elu_alpha))
    if name == "relu":
        return Activation(
            "relu", lambda z: np.maximum(z, 0.0), _relu_d1, _no_d2, _no_d2, smooth=False
        )
    raise DomainError(f"unknown activation {name!r}; choose from {ACTIVATIONS}")


# --------------------------------------------------------------------------
# network container
# --------------------------------------------------------------------------


@dataclass
class Network:
    """Parameters of a uniform-width MLP.

    ``weights[0]`` is ``(n, d)``, ``weights[k]`` for ``k >= 1`` is ``(n, n)``;
    every bias and ``beta`` has length ``n``.
    """

    weights: list
    biases: list
    beta: np.ndarray
    activation: str = "tanh"
    elu_alpha: float = 1.0
    _act: Activation = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.weights = [np.asarray(W, dtype=np.float64) for W in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if not self.weights or len(self.weights) != len(self.biases):
            raise ShapeError("need one bias per weight matrix and at least one layer")
        n, _ = self.weights[0].shape
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            expected_in = self.weights[0].shape[1] if k == 0 else n
            if W.shape != (n, expected_in) or b.shape != (n,):
                raise ShapeError(f"layer {k} has W {W.shape}, b {b.shape}")
        if self.beta.shape != (n,):
            raise ShapeError(f"beta has shape {self.beta.shape}, expected ({n},)")
        for arr in [*self.weights, *self.biases, self.beta]:
            if not np.all(np.isfinite(arr)):
                raise NumericError("network parameters must be finite")
        self._act = make_activation(self.activation, self.elu_alpha)

    @classmethod
    def zeros(cls, input_dim, depth, width, activation="tanh", elu_alpha=1.0):
        if min(input_dim, depth, width) < 1:
            raise DomainError("input_dim, depth and width must be >= 1")
        weights = [np.zeros((width, input_dim))] + [
            np.zeros((width, width)) for _ in range(depth - 1)
        ]
        biases = [np.zeros(width) for _ in range(depth)]
        return cls(weights, biases, np.zeros(width), activation, elu_alpha)

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def depth(self):
        return len(self.weights)

    @property
    def width(self):
        return self.weights[0].shape[0]

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases)) + self.beta.size

    @property
    def act(self):
        return self._act

    def get_flat(self):
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts += [W.ravel(), b]
        parts.append(self.beta)
        return np.concatenate(parts)

    def with_flat(self, flat):
        """Return a new network with parameters taken from ``flat``."""
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (self.n_params,):
            raise ShapeError(f"flat vector has shape {flat.shape}, expected ({self.n_params},)")
        weights, biases, pos = [], [], 0
        for W, b in zip(self.weights, self.biases):
            weights.append(flat[pos : pos + W.size].reshape(W.shape).copy())
            pos += W.size
            biases.append(flat[pos : pos + b.size].copy())
            pos += b.size
        return Network(weights, biases, flat[pos:].copy(), self.activation, self.elu_alpha)

    def copy(self):
        return self.with_flat(self.get_flat())


def _check_points(net, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.shape[0] == net.input_dim else X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[1] != net.input_dim:
        raise ShapeError(f"points have shape {X.shape}, network expects dimension {net.input_dim}")
    if not np.all(np.isfinite(X)):
        raise DomainError("points must be finite")
    return X


# --------------------------------------------------------------------------
# evaluation
# --------------------------------------------------------------------------


class EvalRecord(NamedTuple):
    """Layer outputs ``layers[k]`` (``layers[0]`` is the input) and final output."""

    layers: list
    output: np.ndarray


def forward(net, X):
    """Evaluate the network at a batch of points.

    ``X`` of shape ``(m, d)`` (a single point of length ``d`` is accepted).
    Returns an :class:`EvalRecord` whose ``output`` has shape ``(m,)``.
    """
    Y = _check_points(net, X)
    layers = [Y]
    for W, b in zip(net.weights, net.biases):
        Y = net.act.f(Y @ W.T + b)
        layers.append(Y)
    return EvalRecord(layers, Y @ net.beta)


def predict(net, X):
    return forward(net, X).output


def layer_features(net, X, k=None):
    """Matrix ``D[i, j]`` = output of neuron ``j`` in hidden layer ``k`` at ``X[i]``.

    ``k`` is 1-based and defaults to the last hidden layer.
    """
    if k is None:
        k = net.depth
    if not 1 <= k <= net.depth:
        raise DomainError(f"layer index {k} outside 1..{net.depth}")
    Y = _check_points(net, X)
    for W, b in zip(net.weights[:k], net.biases[:k]):
        Y = net.act.f(Y @ W.T + b)
    return Y


# --------------------------------------------------------------------------
# derivative tape
# --------------------------------------------------------------------------


class NetworkOutput(NamedTuple):
    """Network value and selected input derivatives at a batch of points.

    ``grad[i]`` is dy/dx_i and ``hess[(i, j)]`` is d2y/dx_i dx_j, each of
    shape ``(m,)``.
    """

    value: np.ndarray
    grad: dict
    hess: dict


class OutputSeeds(NamedTuple):
    """Adjoints dLoss/d(output quantity), aligned with :class:`NetworkOutput`."""

    value: np.ndarray | None = None
    grad: dict | None = None
    hess: dict | None = None


def _normalise_requests(net, first, pairs):
    pairs = [tuple(sorted(p)) for p in pairs]
    first = sorted(set(first) | {i for p in pairs for i in p})
    for i in first:
        if not 0 <= i < net.input_dim:
            raise DomainError(f"input index {i} outside 0..{net.input_dim - 1}")
    if pairs and not net.act.smooth:
        raise UnsupportedActivationError(
            f"{net.act.name} activation does not support second input derivatives"
        )
    return first, sorted(set(pairs))


def _flat(A):
    """Collapse leading axes of a stacked channel array into rows."""
    return A.reshape(-1, A.shape[-1])


def _mm(A, B):
    """``A @ B`` for a stack of matrices, as one 2-D product."""
    return (_flat(A) @ B).reshape(A.shape[:-1] + (B.shape[1],))


def _finite(A):
    # one reduction instead of a boolean temporary; the sum is non-finite
    # iff an entry is, unless entries near 1e308 overflow (also a failure)
    return bool(np.isfinite(A.sum())) if A.size else True


class _Tape:
    """Forward pass retaining everything the reverse pass needs."""

    def __init__(self, net, X, first=(), pairs=()):
        # overflow is reported as NumericError below, not as a warning
        with np.errstate(over="ignore", invalid="ignore"):
            self._forward(net, X, first, pairs)

    def _forward(self, net, X, first, pairs):
        self.net = net
        X = _check_points(net, X)
        m = X.shape[0]
        self.first, self.pairs = _normalise_requests(net, first, pairs)
        slot = {i: c for c, i in enumerate(self.first)}
        self.pair_slots = [(slot[a], slot[b]) for a, b in self.pairs]
        nd, nh = len(self.first), len(self.pairs)
        act = net.act

        Y = X
        G = np.zeros((nd, m, X.shape[1]))
        for c, i in enumerate(self.first):
            G[c, :, i] = 1.0
        H = np.zeros((nh, m, X.shape[1]))
        self.inputs, self.cache = [], []
        for k, (W, b) in enumerate(zip(net.weights, net.biases)):
            self.inputs.append((Y, G, H))
            Z = Y @ W.T + b
            ZG = _mm(G, W.T)
            ZH = _mm(H, W.T)
            if act.smooth:
                vals = act.derivatives(Z, 3 if nh else 2 if nd else 1) + [None, None]
                Y, S1, S2, S3 = vals[:4]
            else:
                # piecewise linear: sigma'' = 0 almost everywhere
                Y, S1 = act.derivatives(Z, 1)
                S2, S3 = (np.zeros_like(Z) if nd else None), None
            G = S1 * ZG
            H = np.empty_like(ZH)
            for p, (a, c) in enumerate(self.pair_slots):
                H[p] = S2 * ZG[a] * ZG[c] + S1 * ZH[p]
            if not (_finite(Y) and _finite(G) and _finite(H)):
                raise NumericError(f"non-finite activation in hidden layer {k + 1}", layer=k + 1)
            self.cache.append((ZG, ZH, S1, S2, S3))
        self.top = (Y, G, H)
        beta = net.beta
        self.output = NetworkOutput(
            Y @ beta,
            {i: G[c] @ beta for c, i in enumerate(self.first)},
            {pq: H[p] @ beta for p, pq in enumerate(self.pairs)},
        )

    def backward(self, seeds):
        """Flat gradient of the loss given output adjoints ``seeds``."""
        with np.errstate(over="ignore", invalid="ignore"):
            return self._backward(seeds)

    def _backward(self, seeds):
        net = self.net
        Y, G, H = self.top
        m = Y.shape[0]
        nd, nh = len(self.first), len(self.pairs)
        beta = net.beta

        u_bar = np.zeros(m) if seeds.value is None else np.asarray(seeds.value, dtype=np.float64)
        g_bar = np.zeros((nd, m))
        for i, v in (seeds.grad or {}).items():
            g_bar[self.first.index(i)] = v
        h_bar = np.zeros((nh, m))
        for pq, v in (seeds.hess or {}).items():
            h_bar[self.pairs.index(tuple(sorted(pq)))] = v

        beta_grad = u_bar @ Y + _flat(G).T @ g_bar.ravel() + _flat(H).T @ h_bar.ravel()
        Yb = u_bar[:, None] * beta
        Gb = g_bar[..., None] * beta
        Hb = h_bar[..., None] * beta

        grads = []
        for k in range(net.depth - 1, -1, -1):
            W = net.weights[k]
            Yin, Gin, Hin = self.inputs[k]
            ZG, ZH, S1, S2, S3 = self.cache[k]
            Zb = Yb * S1
            ZGb = Gb * S1
            ZHb = Hb * S1
            if nd:
                Zb = Zb + (Gb * ZG).sum(axis=0) * S2
            for p, (a, c) in enumerate(self.pair_slots):
                t = Hb[p] * S2
                ZGb[a] += t * ZG[c]
                ZGb[c] += t * ZG[a]
                Zb = Zb + Hb[p] * (S3 * ZG[a] * ZG[c] + S2 * ZH[p])
            W_grad = Zb.T @ Yin
            if nd:
                W_grad = W_grad + _flat(ZGb).T @ _flat(Gin)
            if nh:
                W_grad = W_grad + _flat(ZHb).T @ _flat(Hin)
            grads.append((W_grad, Zb.sum(axis=0)))
            if k:
                Yb = Zb @ W
                Gb = _mm(ZGb, W)
                Hb = _mm(ZHb, W)
            if not _finite(W_grad):
                raise NumericError(f"non-finite gradient in hidden layer {k + 1}", layer=k + 1)

        parts = []
        for W_grad, b_grad in reversed(grads):
            parts += [W_grad.ravel(), b_grad]
        parts.append(beta_grad)
        return np.concatenate(parts)


LossFunction = Callable[[NetworkOutput], "tuple[float, OutputSeeds]"]


def value_and_gradient(net, loss, X, first=(), pairs=()):
    """Evaluate ``loss`` on the network output at ``X`` and its parameter gradient.

    Parameters
    ----------
    net : Network
    loss : callable
        ``loss(out: NetworkOutput) -> (value, OutputSeeds)`` where the seeds are
        the partial derivatives of the scalar loss with respect to each output
        quantity it consumed.
    X : array_like, shape (m, d)
    first, pairs
        Input indices whose first derivatives, and index pairs whose second
        derivatives, ``loss`` needs.

    Returns
    -------
    value : float
    grad : ndarray, shape (net.n_params,)
        In the canonical flat order.
    """
    tape = _Tape(net, X, first, pairs)
    value, seeds = loss(tape.output)
    if not np.isfinite(value):
        raise NumericError("loss is not finite")
    return float(value), tape.backward(seeds)


def param_gradient(net, loss, X, first=(), pairs=()):
    """Flat parameter gradient of ``loss``; see :func:`value_and_gradient`."""
    return value_and_gradient(net, loss, X, first, pairs)[1]


def input_derivatives(net, X, pairs=()):
    """Value, input gradient and requested second derivatives.

    Returns ``(value, gradient, hess)`` with ``gradient`` of shape ``(m, d)``
    and ``hess`` mapping each pair ``(i, j)`` to an array of shape ``(m,)``.
    A single point yields scalars and a ``(d,)`` gradient.
    """
    single = np.asarray(X).ndim == 1 and np.asarray(X).shape[0] == net.input_dim
    tape = _Tape(net, X, range(net.input_dim), pairs)
    out = tape.output
    grad = np.stack([out.grad[i] for i in range(net.input_dim)], axis=1)
    hess = {pq: out.hess[tuple(sorted(pq))] for pq in pairs}
    if single:
        return float(out.value[0]), grad[0], {pq: float(v[0]) for pq, v in hess.items()}
    return out.value, grad, hess


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------


def save_network(net, path):
    """Write a versioned plain-text checkpoint.

    Layout: magic line, ``key value`` header lines, then one parameter per
    line in canonical flat order using round-trip ``repr`` formatting.
    """
    flat = net.get_flat()
    lines = [
        f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
        f"input_dim {net.input_dim}",
        f"depth {net.depth}",
        f"width {net.width}",
        f"activation {net.activation}",
        f"elu_alpha {net.elu_alpha!r}",
        f"params {flat.size}",
    ]
    lines += [repr(float(v)) for v in flat]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_network(path):
    with open(path) as fh:
        lines = fh.read().split("\n")
    magic = lines[0].split()
    if len(magic) != 2 or magic[0] != CHECKPOINT_MAGIC:
        raise DomainError(f"{path} is not an epsrank checkpoint")
    if int(magic[1]) != CHECKPOINT_VERSION:
        raise DomainError(f"unsupported checkpoint version {magic[1]}")
    header = dict(line.split(" ", 1) for line in lines[1:7])
    net = Network.zeros(
        int(header["input_dim"]),
        int(header["depth"]),
        int(header["width"]),
        header["activation"],
        float(header["elu_alpha"]),
    )
    count = int(header["params"])
    flat = np.array([float(v) for v in lines[7 : 7 + count]])
    return net.with_flat(flat)
