"""Run resolved experiment configs and write their artifacts."""
from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import rfm
from .config import FULL_RFM, ExperimentConfig, dumps
from .gram import build_grid
from .initializers import initialize
from .net import Network, save_network
from .plot import write_svg
from .tasks import TARGETS, make_task
from .train import (OptimizerState, first_crossing, read_trajectory_csv, train_run, write_trajectory_csv,
                    write_trajectory_jsonl)

__all__ = ["OUTPUT_ROOT_ENV", "default_output_dir", "setup", "run_seed", "run_experiment", "run_rfm"]

OUTPUT_ROOT_ENV = "EPSRANK_OUTPUT_ROOT"


def default_output_dir(cfg):
    root = os.environ.get(OUTPUT_ROOT_ENV, "runs")
    return os.path.join(root, cfg.preset)


def setup(cfg: ExperimentConfig, seed):
    """Task, initial network, rank grid and optimiser for one seed."""
    task = make_task(cfg.task, cfg.counts(), cfg.mu_bc, cfg.mu_ic,
                     target=cfg.target if cfg.task.startswith("fit") else None)
    net = Network.zeros(task.dim, cfg.depth, cfg.width, cfg.activation, elu_alpha=cfg.elu_alpha)
    net = initialize(net, cfg.init, seed, gamma=cfg.gamma, R=cfg.offset_range, domain=task.domain)
    grid = build_grid(task.domain, cfg.grid_scheme, cfg.grid_points, seed=seed)
    return task, net, grid, OptimizerState(kind=cfg.optimizer, lr=cfg.lr)


def run_seed(cfg, seed, out_dir):
    """Train one seed; writes ``seed<S>.csv``, ``.jsonl`` and ``.net``."""
    task, net, grid, opt = setup(cfg, seed)
    res = train_run(net, task, opt, cfg.steps, cfg.rank_every, grid, cfg.epsilon, seed=seed,
                    per_layer=cfg.per_layer, eig_method=cfg.eig_method)
    stem = os.path.join(out_dir, f"seed{seed}")
    if res.records:
        write_trajectory_csv(res.records, stem + ".csv")
        write_trajectory_jsonl(res.records, stem + ".jsonl")
    if not res.aborted:
        save_network(res.network, stem + ".net")
    rank_level = cfg.rank_fraction * cfg.width
    last = res.records[-1] if res.records else None
    return {
        "seed": seed,
        "status": res.status,
        "message": res.message,
        "initial_loss": float(res.loss_history[0]) if len(res.loss_history) else None,
        "final_loss": None if np.isnan(res.final_loss) else res.final_loss,
        "final_rank": last.eps_rank if last else None,
        "first_loss_crossing": first_crossing(res.records, lambda r: r.loss <= cfg.loss_threshold),
        "first_rank_crossing": first_crossing(res.records, lambda r: r.eps_rank >= rank_level),
    }


def _run_seed_args(args):
    return run_seed(*args)


def run_experiment(cfg, out_dir):
    """Run every seed and write the config echo, summary and plot.

    Returns the summary dict; ``summary["aborted"]`` lists aborted seeds.
    """
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.ini"), "w") as fh:
        fh.write(dumps(cfg))
    if cfg.mode == "rfm":
        return run_rfm(cfg, out_dir)
    workers = cfg.workers or os.cpu_count() or 1
    jobs = [(cfg, s, out_dir) for s in cfg.seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            rows = list(pool.map(_run_seed_args, jobs))
    else:
        rows = [run_seed(*job) for job in jobs]
    summary = {
        "preset": cfg.preset,
        "loss_threshold": cfg.loss_threshold,
        "rank_level": cfg.rank_fraction * cfg.width,
        "seeds": rows,
        "aborted": [r["seed"] for r in rows if r["status"] != "ok"],
    }
    series = []
    for r in rows:
        path = os.path.join(out_dir, f"seed{r['seed']}.csv")
        if os.path.exists(path):
            series.append((f"seed {r['seed']}", read_trajectory_csv(path)))
    if series:
        write_svg(series, os.path.join(out_dir, "trajectory.svg"), title=cfg.preset)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary


def rfm_rows(cfg, seed, full=False):
    if full:
        cfg = cfg.replace(**FULL_RFM)
    task_domain = ((-1.0, 1.0), (-1.0, 1.0))
    target = TARGETS[cfg.target]
    colloc = build_grid(task_domain, "trapezoid", cfg.collocation_points)
    evalg = build_grid(task_domain, "trapezoid", cfg.grid_points)
    return rfm.compare(task_domain, target, colloc, evalg, cfg.total_features, cfg.cells_per_dim,
                       cfg.feature_gamma, cfg.trunc_tol, cfg.epsilon, seed, method=cfg.eig_method)


RFM_DESIGN = ("indicator partition of unity over congruent cells; features tanh(gamma (a . xl + b)) with xl "
              "cell-local in [-1, 1]^d, a uniform on the unit sphere, b ~ U(-1, 1)")
RFM_COLUMNS = ("seed", "method", "features", "cells", "eps_rank", "l2_error", "rel_l2_error", "solve_seconds")


def run_rfm(cfg, out_dir, full=False):
    """ELM versus RFM comparison for every seed; writes ``rfm.json`` and ``rfm.csv``."""
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for seed in cfg.seeds:
        for row in rfm_rows(cfg, seed, full):
            rows.append(dict(row, seed=seed))
    summary = {"preset": cfg.preset, "full": full, "design": RFM_DESIGN, "rows": rows, "aborted": []}
    with open(os.path.join(out_dir, "rfm.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "rfm.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RFM_COLUMNS)
        for row in rows:
            writer.writerow([row[c] for c in RFM_COLUMNS])
    return summary
