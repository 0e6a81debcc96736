"""Experiment configuration: presets and the ``key = value`` file format.

A config file has one section per concern::

    [experiment]
    preset = ex2.1a
    seeds = 0, 1, 2

    [network]
    width = 30

Keys left out are resolved from the named preset, then from the defaults
below. ``dumps`` writes every field, so the echo of a resolved config
parses back to an identical object.
"""
from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field, fields

from .exceptions import ConfigError

__all__ = ["ExperimentConfig", "PRESETS", "resolve", "loads", "dumps", "load", "preset_names"]

_UNSET = object()


def _f(section, default, doc=""):
    return field(default=default, metadata={"section": section, "doc": doc})


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = _f("experiment", "custom")
    mode: str = _f("experiment", "train", "train or rfm")
    seeds: tuple = _f("experiment", (0,))
    workers: int = _f("experiment", 1, "0 means one per CPU")
    loss_threshold: float = _f("experiment", 1e-2, "first-crossing level reported in the summary")
    rank_fraction: float = _f("experiment", 0.95, "first-crossing rank level as a fraction of width")

    task: str = _f("task", "fit1d")
    target: str = _f("task", "staircase")
    train_points: int = _f("task", 250)
    interior: int = _f("task", 250)
    initial: int = _f("task", 100)
    boundary: int = _f("task", 100)
    mu_bc: float = _f("task", 1.0)
    mu_ic: float = _f("task", 1.0)

    depth: int = _f("network", 2)
    width: int = _f("network", 50)
    activation: str = _f("network", "tanh")
    elu_alpha: float = _f("network", 1.0)

    init: str = _f("init", "xavier")
    gamma: float = _f("init", 2.0)
    offset_range: float | None = _f("init", None, "UDI R; none derives it from the domain")

    optimizer: str = _f("optimizer", "adam")
    lr: float = _f("optimizer", 1e-3)

    steps: int = _f("train", 20000)
    rank_every: int = _f("train", 100)
    per_layer: bool = _f("train", False)

    grid_scheme: str = _f("rank", "trapezoid")
    grid_points: int = _f("rank", 129, "nodes per axis")
    epsilon: float = _f("rank", 1e-6)
    eig_method: str = _f("rank", "jacobi")

    cells_per_dim: int = _f("rfm", 2)
    total_features: int = _f("rfm", 256)
    feature_gamma: float = _f("rfm", 1.0)
    trunc_tol: float = _f("rfm", 1e-12)
    collocation_points: int = _f("rfm", 63, "per axis")

    def counts(self):
        if self.task in ("fit1d", "fit2d"):
            return {"train": self.train_points}
        return {"interior": self.interior, "initial": self.initial, "boundary": self.boundary}

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_SECTIONS = list(dict.fromkeys(f.metadata["section"] for f in fields(ExperimentConfig)))

PRESETS = {
    # staircase in 1-D fitting, L=2 n=50 (L=4 and n=25 by override)
    "ex2.1a": dict(task="fit1d", depth=2, width=50),
    # activation sweep, L=3 n=50; pick the activation with [network] activation
    "ex2.1b": dict(task="fit1d", depth=3, width=50, activation="elu"),
    # layer-wise ranks, L=4 n=50
    "ex2.1c": dict(task="fit1d", depth=4, width=50, per_layer=True),
    "ex2.2": dict(task="allen-cahn", depth=3, width=50, interior=250, initial=100, boundary=100,
                  grid_points=100, epsilon=1e-8, steps=10000),
    "ex3.1-failed": dict(task="heat2d", depth=3, width=100, interior=1000, initial=1000, boundary=50,
                         grid_points=50, steps=5000),
    "ex3.1-trainable": dict(task="heat2d", depth=3, width=100, interior=2500, initial=10000, boundary=50,
                            grid_points=50, steps=5000),
    # reduced scale; rfm-compare --full switches to 3 x 3 cells and 900 features
    "ex3.2": dict(mode="rfm", task="fit2d", target="product-cosine", depth=1, width=256, cells_per_dim=2,
                  total_features=256, grid_points=65, collocation_points=63, epsilon=1e-12,
                  seeds=(0, 1, 2, 3, 4)),
    "ex4.1": dict(task="fit1d", depth=2, width=30, init="grid"),
    "ex4.2": dict(task="fit2d", target="bump-wave", depth=3, width=50, train_points=550, init="udi", gamma=2.0,
                  steps=10000),
    "ex4.3": dict(task="poisson2d", depth=2, width=50, interior=250, boundary=100, mu_bc=20.0, init="udi",
                  gamma=1.0, steps=10000),
}

FULL_RFM = dict(cells_per_dim=3, total_features=900, width=900)


def preset_names():
    return sorted(PRESETS)


def _check_preset(name):
    if name != "custom" and name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")


def resolve(preset="custom", **overrides):
    """Defaults, then the preset, then explicit overrides."""
    _check_preset(preset)
    values = dict(PRESETS.get(preset, {}))
    values.update({k: v for k, v in overrides.items() if v is not None})
    values["preset"] = preset
    cfg = ExperimentConfig(**values)
    validate(cfg)
    return cfg


def validate(cfg):
    def need(cond, name, msg):
        if not cond:
            raise ConfigError(f"[{_FIELDS[name].metadata['section']}] {name}: {msg}")

    need(cfg.mode in ("train", "rfm"), "mode", "must be train or rfm")
    need(len(cfg.seeds) >= 1, "seeds", "need at least one seed")
    need(cfg.workers >= 0, "workers", "must be >= 0")
    need(cfg.depth >= 1, "depth", "must be >= 1")
    need(cfg.width >= 1, "width", "must be >= 1")
    need(cfg.steps >= 1, "steps", "must be >= 1")
    need(cfg.rank_every >= 1, "rank_every", "must be >= 1")
    need(cfg.lr > 0, "lr", "must be > 0")
    need(cfg.epsilon >= 0, "epsilon", "must be >= 0")
    need(cfg.grid_points >= 2, "grid_points", "must be >= 2")
    need(cfg.mu_bc > 0, "mu_bc", "must be > 0")
    need(cfg.mu_ic > 0, "mu_ic", "must be > 0")
    need(cfg.eig_method in ("jacobi", "lapack"), "eig_method", "must be jacobi or lapack")
    need(cfg.optimizer in ("adam", "sgd"), "optimizer", "must be adam or sgd")
    need(cfg.init in ("xavier", "grid", "udi"), "init", "must be xavier, grid or udi")
    for name in ("train_points", "interior", "initial", "boundary", "cells_per_dim", "total_features",
                 "collocation_points"):
        need(getattr(cfg, name) >= 1, name, "must be >= 1")
    return cfg


# --------------------------------------------------------------------------
# text format
# --------------------------------------------------------------------------


def _format(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(name, text):
    f = _FIELDS[name]
    kind = type(f.default)
    text = text.strip()
    if name == "seeds":
        return tuple(int(t) for t in re.split(r"[,\s]+", text) if t)
    if name == "offset_range":
        return None if text.lower() in ("none", "auto", "") else float(text)
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


def _line_of(text, section, key):
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return lineno
    return None


def loads(text, **overrides):
    """Parse config text; ``overrides`` (e.g. from the command line) win."""
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"line {_line_of_section(text, section)}: unknown section [{section}]; "
                              f"expected one of {', '.join(_SECTIONS)}")
        for key, raw in parser.items(section):
            where = _line_of(text, section, key)
            if key not in _FIELDS or _FIELDS[key].metadata["section"] != section:
                raise ConfigError(f"line {where}: [{section}] has no field {key!r}")
            try:
                values[key] = _parse(key, raw)
            except ValueError as exc:
                raise ConfigError(f"line {where}: [{section}] {key}: {exc}") from None
    preset = overrides.pop("preset", None) or values.pop("preset", "custom")
    values.pop("preset", None)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return resolve(preset, **values)


def _line_of_section(text, section):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{section}]":
            return lineno
    return None


def load(path, **overrides):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return loads(text, **overrides)


def dumps(cfg):
    """Every field, grouped by section, in declaration order."""
    out = []
    for section in _SECTIONS:
        out.append(f"[{section}]")
        for f in fields(cfg):
            if f.metadata["section"] == section:
                out.append(f"{f.name} = {_format(getattr(cfg, f.name))}")
        out.append("")
    return "\n".join(out)
