"""Fitting and PDE tasks expressed as weighted mean-square residual terms.

A task turns a sample set into a list of :class:`LossTerm`. Each term owns
its points, the input derivatives it needs, and a residual function that
returns the residual vector together with a vector-Jacobian product mapping
dLoss/dresidual back onto the network output quantities.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import ConfigError, UnsupportedActivationError
from .net import NetworkOutput, OutputSeeds, value_and_gradient

__all__ = [
    "TASK_KINDS",
    "LossTerm",
    "Task",
    "FitTask",
    "PoissonTask",
    "HeatTask",
    "AllenCahnTask",
    "staircase_target",
    "bump_wave_target",
    "evaluate_terms",
    "make_task",
]

TASK_KINDS = ("fit1d", "fit2d", "poisson2d", "heat2d", "allen-cahn")


@dataclass
class LossTerm:
    """``weight * mean(residual(out, points) ** 2)``."""

    name: str
    points: np.ndarray
    residual: Callable
    weight: float = 1.0
    first: tuple = ()
    pairs: tuple = ()

    def loss_fn(self, out):
        r, vjp = self.residual(out, self.points)
        m = r.shape[0]
        # an overflowing loss is caught as non-finite by the caller
        with np.errstate(over="ignore", invalid="ignore"):
            value = self.weight * float(r @ r) / m
        return value, vjp(2.0 * self.weight * r / m)


def evaluate_terms(net, terms, with_grad=True):
    """Total loss, flat gradient and per-term values."""
    total, grad, parts = 0.0, None, {}
    for term in terms:
        if term.pairs and not net.act.smooth:
            raise UnsupportedActivationError(f"{term.name} needs second derivatives; {net.activation} cannot")
        value, g = value_and_gradient(net, term.loss_fn, term.points, term.first, term.pairs)
        total += value
        parts[term.name] = value
        if with_grad:
            grad = g if grad is None else grad + g
    return total, grad, parts


def _value_residual(target):
    """Residual ``u - target`` at fixed targets."""

    def residual(out, X):
        return out.value - target, lambda c: OutputSeeds(value=c)

    return residual


# --------------------------------------------------------------------------
# targets
# --------------------------------------------------------------------------


def staircase_target(X):
    x = np.asarray(X)[:, 0]
    return np.cos(x) + np.cos(2 * x) + np.cos(30 * x)


def bump_wave_target(X):
    X = np.asarray(X)
    x, y = X[:, 0], X[:, 1]
    return np.exp(-(x**2 + y**2)) * np.sin(5 * x + 5 * y)


def product_cosine_target(X):
    X = np.asarray(X)
    x, y = X[:, 0], X[:, 1]
    return np.cos(x) * np.cos(y) + np.cos(10 * x) * np.cos(10 * y)


TARGETS = {
    "staircase": staircase_target,
    "bump-wave": bump_wave_target,
    "product-cosine": product_cosine_target,
}


# --------------------------------------------------------------------------
# tasks
# --------------------------------------------------------------------------


def _uniform(rng, domain, count):
    lo = np.array([a for a, _ in domain])
    hi = np.array([b for _, b in domain])
    return lo + (hi - lo) * rng.random((count, len(domain)))


def _tensor_grid(domain, count):
    """Roughly ``count`` points on a uniform tensor grid including the boundary."""
    d = len(domain)
    side = count if d == 1 else max(2, int(round(count ** (1.0 / d))))
    axes = np.meshgrid(*[np.linspace(a, b, side) for a, b in domain], indexing="ij")
    return np.stack([ax.ravel() for ax in axes], axis=1)


@dataclass
class Task:
    kind: str
    domain: tuple
    counts: dict = field(default_factory=dict)
    mu_bc: float = 1.0
    mu_ic: float = 1.0

    @property
    def dim(self):
        return len(self.domain)

    @property
    def is_pde(self):
        return self.kind not in ("fit1d", "fit2d")

    def check(self):
        for name, c in self.counts.items():
            if int(c) < 1:
                raise ConfigError(f"sample count {name} must be >= 1, got {c}")
        if self.mu_bc <= 0 or self.mu_ic <= 0:
            raise ConfigError("loss weights must be > 0")

    def sample(self, seed):
        raise NotImplementedError

    def loss_terms(self, samples):
        raise NotImplementedError

    def exact(self, X):
        """Reference solution values, or ``None`` when no closed form exists."""
        return None


@dataclass
class FitTask(Task):
    """Least-squares fit of an analytic target on a uniform training grid."""

    target: Callable = staircase_target

    def sample(self, seed=None):
        X = _tensor_grid(self.domain, int(self.counts.get("train", 250)))
        return {"train": X}

    def loss_terms(self, samples):
        X = samples["train"]
        return [LossTerm("mse", X, _value_residual(self.target(X)))]

    def exact(self, X):
        return self.target(X)


def _sin_product(X, k):
    return np.sin(k * X[:, 0]) * np.sin(k * X[:, 1])


@dataclass
class PoissonTask(Task):
    """-Lap u = 32 sin4x sin4y on [-pi/2, pi/2]^2 with u = 0 on the boundary."""

    freq: float = 4.0

    def forcing(self, X):
        return 2 * self.freq**2 * _sin_product(X, self.freq)

    def exact(self, X):
        return _sin_product(X, self.freq)

    def exact_output(self, X):
        u = self.exact(X)
        k = self.freq
        x, y = X[:, 0], X[:, 1]
        return NetworkOutput(
            u,
            {0: k * np.cos(k * x) * np.sin(k * y), 1: k * np.sin(k * x) * np.cos(k * y)},
            {(0, 0): -k * k * u, (1, 1): -k * k * u},
        )

    def sample(self, seed):
        rng = np.random.default_rng([int(seed), 11])
        n_int = int(self.counts.get("interior", 250))
        n_bc = int(self.counts.get("boundary", 100))
        return {"interior": _uniform(rng, self.domain, n_int), "boundary": _box_boundary(rng, self.domain, n_bc)}

    def interior_residual(self, out, X):
        f = self.forcing(X)
        r = out.hess[(0, 0)] + out.hess[(1, 1)] + f
        return r, lambda c: OutputSeeds(hess={(0, 0): c, (1, 1): c})

    def loss_terms(self, samples):
        return [
            LossTerm("pde", samples["interior"], self.interior_residual, 1.0, (0, 1), ((0, 0), (1, 1))),
            LossTerm("bc", samples["boundary"], _value_residual(0.0), self.mu_bc),
        ]


def _box_boundary(rng, domain, count):
    """``count`` points spread uniformly over the faces of a 2-D box."""
    (a, b), (c, d) = domain[0], domain[1]
    pts = _uniform(rng, domain, count)
    face = np.arange(count) % 4
    pts[face == 0, 0] = a
    pts[face == 1, 0] = b
    pts[face == 2, 1] = c
    pts[face == 3, 1] = d
    return pts


@dataclass
class HeatTask(Task):
    """u_t = kappa Lap u on [-pi, pi]^2 x [0, T], u0 = sin5x sin5y, u = 0 on the sides.

    Inputs are ordered (x, y, t); the exact solution is exp(-t) sin5x sin5y.
    """

    kappa: float = 0.02
    freq: float = 5.0

    def initial(self, X):
        return _sin_product(X, self.freq)

    def exact(self, X):
        return np.exp(-2 * self.kappa * self.freq**2 * X[:, 2]) * _sin_product(X, self.freq)

    def sample(self, seed):
        rng = np.random.default_rng([int(seed), 13])
        n1 = int(self.counts.get("interior", 1000))
        n2 = int(self.counts.get("initial", 1000))
        n3 = int(self.counts.get("boundary", 50))
        interior = _uniform(rng, self.domain, n1)
        initial = _uniform(rng, self.domain, n2)
        initial[:, 2] = self.domain[2][0]
        boundary = _uniform(rng, self.domain, n3)
        boundary[:, :2] = _box_boundary(rng, self.domain[:2], n3)
        return {"interior": interior, "initial": initial, "boundary": boundary}

    def interior_residual(self, out, X):
        k = self.kappa
        r = out.grad[2] - k * (out.hess[(0, 0)] + out.hess[(1, 1)])
        return r, lambda c: OutputSeeds(grad={2: c}, hess={(0, 0): -k * c, (1, 1): -k * c})

    def loss_terms(self, samples):
        init = samples["initial"]
        return [
            LossTerm("pde", samples["interior"], self.interior_residual, 1.0, (0, 1, 2), ((0, 0), (1, 1))),
            LossTerm("ic", init, _value_residual(self.initial(init)), self.mu_ic),
            LossTerm("bc", samples["boundary"], _value_residual(0.0), self.mu_bc),
        ]


@dataclass
class AllenCahnTask(Task):
    """u_t = 1e-4 u_xx + u - u^3 on [-1, 1] x [0, 1], u(x, 0) = cos(pi x), periodic in x.

    Inputs are ordered (x, t). Periodicity is a penalty on u(-1, t) - u(1, t).
    """

    diffusion: float = 1e-4

    def initial(self, X):
        return np.cos(np.pi * X[:, 0])

    def sample(self, seed):
        rng = np.random.default_rng([int(seed), 17])
        n1 = int(self.counts.get("interior", 250))
        n2 = int(self.counts.get("initial", 100))
        n3 = int(self.counts.get("boundary", 100))
        interior = _uniform(rng, self.domain, n1)
        initial = _uniform(rng, self.domain, n2)
        initial[:, 1] = self.domain[1][0]
        t = _uniform(rng, self.domain[1:], n3)[:, 0]
        (a, b) = self.domain[0]
        periodic = np.concatenate([np.stack([np.full(n3, a), t], 1), np.stack([np.full(n3, b), t], 1)])
        return {"interior": interior, "initial": initial, "periodic": periodic}

    def interior_residual(self, out, X):
        u = out.value
        r = out.grad[1] - self.diffusion * out.hess[(0, 0)] - u + u**3
        du = -1.0 + 3.0 * u * u
        return r, lambda c: OutputSeeds(value=c * du, grad={1: c}, hess={(0, 0): -self.diffusion * c})

    @staticmethod
    def periodic_residual(out, X):
        k = X.shape[0] // 2
        r = out.value[:k] - out.value[k:]
        return r, lambda c: OutputSeeds(value=np.concatenate([c, -c]))

    def loss_terms(self, samples):
        init = samples["initial"]
        return [
            LossTerm("pde", samples["interior"], self.interior_residual, 1.0, (0, 1), ((0, 0),)),
            LossTerm("ic", init, _value_residual(self.initial(init)), self.mu_ic),
            LossTerm("bc", samples["periodic"], self.periodic_residual, self.mu_bc),
        ]


def make_task(kind, counts=None, mu_bc=None, mu_ic=1.0, target=None, domain=None):
    """Task of the given kind with its canonical domain and defaults."""
    counts = dict(counts or {})
    if kind == "fit1d":
        task = FitTask(kind, domain or ((-1.0, 1.0),), counts, target=TARGETS[target or "staircase"])
    elif kind == "fit2d":
        task = FitTask(kind, domain or ((-1.0, 1.0), (-1.0, 1.0)), counts, target=TARGETS[target or "bump-wave"])
    elif kind == "poisson2d":
        h = np.pi / 2
        task = PoissonTask(kind, domain or ((-h, h), (-h, h)), counts, 20.0 if mu_bc is None else mu_bc, mu_ic)
    elif kind == "heat2d":
        task = HeatTask(kind, domain or ((-np.pi, np.pi), (-np.pi, np.pi), (0.0, 1.0)), counts,
                        1.0 if mu_bc is None else mu_bc, mu_ic)
    elif kind == "allen-cahn":
        task = AllenCahnTask(kind, domain or ((-1.0, 1.0), (0.0, 1.0)), counts, 1.0 if mu_bc is None else mu_bc, mu_ic)
    else:
        raise ConfigError(f"unknown task kind {kind!r}; choose from {TASK_KINDS}")
    task.domain = tuple(tuple(map(float, iv)) for iv in task.domain)
    task.check()
    return task
