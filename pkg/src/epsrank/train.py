"""Optimisers and the instrumented training loop.

Iteration ``i`` means "after ``i`` optimiser updates". A record is emitted at
every ``i`` in ``0, rank_every, 2 * rank_every, ...`` with ``i < steps``; the
loss it carries is the loss at those parameters (the one whose gradient
drives update ``i + 1``). The loss after the last update is reported
separately as ``TrainResult.final_loss``.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError, NumericError
from .gram import DEFAULT_EPSILON, eps_rank, gram_matrix
from .net import layer_features
from .tasks import LossTerm, _value_residual, evaluate_terms

__all__ = [
    "OptimizerState",
    "TrajectoryRecord",
    "TrainResult",
    "mse_loss",
    "pinn_loss",
    "train_run",
    "iter_train",
    "first_crossing",
    "smoothed_ranks",
    "is_stepwise",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_trajectory_jsonl",
]


@dataclass
class OptimizerState:
    """Adam or plain gradient descent over the flat parameter vector."""

    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0

    def __post_init__(self):
        if self.kind not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.kind!r}; choose adam or sgd")
        if not self.lr > 0:
            raise ConfigError("learning rate must be > 0")

    def step(self, params, grad):
        """Return updated parameters; moment arrays are updated in place."""
        self.t += 1
        if self.kind == "sgd":
            return params - self.lr * grad
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class TrajectoryRecord:
    iteration: int
    loss: float
    eps_rank: int
    layer_ranks: list | None = None
    top_eigenvalues: list | None = None
    wall_ms: float = 0.0

    def row(self):
        """CSV/JSON fields; ``wall_ms`` is excluded so files are reproducible."""
        out = {"iteration": self.iteration, "loss": self.loss, "eps_rank": self.eps_rank}
        for k, r in enumerate(self.layer_ranks or [], start=1):
            out[f"rank_layer{k}"] = r
        return out


@dataclass
class TrainResult:
    records: list
    network: object
    loss_history: np.ndarray
    final_loss: float
    status: str = "ok"
    message: str = ""
    initial_network: object = field(default=None, repr=False)

    @property
    def aborted(self):
        return self.status != "ok"


def mse_loss(net, X, y):
    """Mean squared error of the network on ``(X, y)`` and its flat gradient."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.shape[0] == 0:
        raise DomainError("mse_loss needs at least one sample")
    value, grad, _ = evaluate_terms(net, [LossTerm("mse", X, _value_residual(y))])
    return value, grad


def pinn_loss(net, task, samples):
    """Composite PDE loss (interior residual plus weighted boundary/initial terms)."""
    if not task.is_pde:
        raise ConfigError(f"{task.kind} is not a PDE task")
    for name, pts in samples.items():
        if len(pts) == 0:
            raise ConfigError(f"sample set {name!r} is empty")
    value, grad, _ = evaluate_terms(net, task.loss_terms(samples))
    return value, grad


def _measure(net, grid, epsilon, per_layer, method):
    if per_layer:
        ranks, Y = [], grid.points
        spectrum = None
        for W, b in zip(net.weights, net.biases):
            Y = net.act.f(Y @ W.T + b)
            spectrum = eps_rank(gram_matrix(Y, grid), epsilon, method)
            ranks.append(spectrum.eps_rank)
        return spectrum, ranks
    D = layer_features(net, grid.points)
    return eps_rank(gram_matrix(D, grid), epsilon, method), None


def iter_train(net, task, opt, steps, rank_every=100, grid=None, epsilon=DEFAULT_EPSILON,
               seed=0, per_layer=False, samples=None, eig_method="jacobi", history=None):
    """Generator form of :func:`train_run`.

    Yields :class:`TrajectoryRecord` objects and finally returns a
    :class:`TrainResult` (available as ``StopIteration.value``).
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    if rank_every < 1:
        raise DomainError("rank_every must be >= 1")
    if grid is not None and grid.dim != net.input_dim:
        raise DomainError(f"rank grid dimension {grid.dim} != network input dimension {net.input_dim}")
    if samples is None:
        samples = task.sample(seed)
    terms = task.loss_terms(samples)
    current = net.copy()
    params = current.get_flat()
    losses = np.empty(steps)
    records = []
    start = time.perf_counter()
    status, message = "ok", ""
    n_loss = 0
    for i in range(steps):
        try:
            loss, grad, _ = evaluate_terms(current, terms)
        except NumericError as exc:
            status, message = "aborted", f"iteration {i}: {exc}"
            break
        losses[i] = loss
        n_loss = i + 1
        if i % rank_every == 0:
            if grid is not None:
                spectrum, ranks = _measure(current, grid, epsilon, per_layer, eig_method)
                rank, top = spectrum.eps_rank, spectrum.eigenvalues[:5].tolist()
            else:
                rank, ranks, top = -1, None, None
            rec = TrajectoryRecord(i, loss, rank, ranks, top, (time.perf_counter() - start) * 1e3)
            records.append(rec)
            if history is not None:
                history.append(current.copy())
            yield rec
        params = opt.step(params, grad)
        if not np.all(np.isfinite(params)):
            status, message = "aborted", f"iteration {i + 1}: parameters became non-finite"
            break
        current = current.with_flat(params)
    losses = losses[:n_loss]
    final_loss = float("nan")
    if status == "ok":
        try:
            final_loss = evaluate_terms(current, terms, with_grad=False)[0]
        except NumericError as exc:
            status, message = "aborted", f"iteration {steps}: {exc}"
    return TrainResult(records, current, losses, final_loss, status, message, net)


def train_run(net, task, opt, steps, rank_every=100, grid=None, epsilon=DEFAULT_EPSILON,
              seed=0, per_layer=False, samples=None, eig_method="jacobi", callback=None):
    """Train ``net`` on ``task`` and record loss / epsilon-rank trajectories.

    Parameters
    ----------
    net : Network
        Initial network (not modified).
    task : Task
    opt : OptimizerState
        Mutated in place.
    steps : int
        Number of optimiser updates.
    rank_every : int
        Record cadence.
    grid : QuadratureGrid, optional
        Fixed grid for the Gram matrix; without it ranks are reported as -1.
    epsilon : float
    seed : int
        Seeds the task's random sample sets.
    per_layer : bool
        Also record the epsilon-rank of every hidden layer.
    samples : dict, optional
        Pre-built sample sets (overrides ``seed`` sampling).
    callback : callable, optional
        Called with each record as it is produced.

    Returns
    -------
    TrainResult
    """
    gen = iter_train(net, task, opt, steps, rank_every, grid, epsilon, seed, per_layer, samples, eig_method)
    while True:
        try:
            rec = next(gen)
        except StopIteration as stop:
            return stop.value
        if callback is not None:
            callback(rec)


def first_crossing(records, predicate):
    """Iteration of the first record satisfying ``predicate``, else ``None``."""
    for rec in records:
        if predicate(rec):
            return rec.iteration
    return None


def smoothed_ranks(records, window=5):
    """Trailing moving average of the recorded eps-ranks (``window`` records)."""
    r = np.array([rec.eps_rank for rec in records], dtype=np.float64)
    if window < 1:
        raise DomainError("window must be >= 1")
    if r.size < window:
        return r
    return np.convolve(r, np.ones(window) / window, mode="valid")


def is_stepwise(records, window=5, tol=1.0):
    """Whether the smoothed rank trajectory is non-decreasing.

    Each smoothed value may fall below its predecessor by at most ``tol``,
    which absorbs single-neuron flicker at the eps threshold.
    """
    s = smoothed_ranks(records, window)
    return bool(np.all(np.diff(s) >= -tol))


# --------------------------------------------------------------------------
# trajectory files
# --------------------------------------------------------------------------


def _fmt(v):
    return repr(float(v)) if isinstance(v, float) else str(v)


def trajectory_csv_text(records):
    fields = list(records[0].row()) if records else ["iteration", "loss", "eps_rank"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for rec in records:
        row = rec.row()
        writer.writerow([_fmt(row[f]) for f in fields])
    return buf.getvalue()


def write_trajectory_csv(records, path):
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_csv_text(records))


def write_trajectory_jsonl(records, path):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.row()) + "\n")


def read_trajectory_csv(path):
    """Parse a trajectory CSV; raises ``ValueError`` naming the bad row."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if header[:3] != ["iteration", "loss", "eps_rank"]:
        raise ValueError(f"{path}: row 1: unexpected header {header}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            layer = [int(v) for v in row[3:]] or None
            records.append(TrajectoryRecord(int(row[0]), float(row[1]), int(row[2]), layer))
        except ValueError as exc:
            raise ValueError(f"{path}: row {lineno}: {exc}") from None
    if not records:
        raise ValueError(f"{path}: no records after the header")
    return records
