"""Command line entry point: ``epsrank run|plot|rfm-compare|theory``.

Exit codes: 0 success, 2 bad config or input file, 3 run aborted on a
non-finite loss (partial artifacts are kept).
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from .exceptions import ConfigError, EpsRankError
from .gram import build_grid
from .plot import write_svg
from .runner import default_output_dir, run_experiment, run_rfm
from .theory import compress, probe_lemma
from .train import read_trajectory_csv

EXIT_OK, EXIT_CONFIG, EXIT_ABORT = 0, 2, 3


def _err(msg):
    print(f"epsrank: error: {msg}", file=sys.stderr)


def _resolve(args, **extra):
    over = dict(extra)
    if getattr(args, "seed", None) is not None:
        over["seeds"] = tuple(args.seed)
    if getattr(args, "steps", None) is not None:
        over["steps"] = args.steps
    if getattr(args, "workers", None) is not None:
        over["workers"] = args.workers
    if args.config:
        return cfgmod.load(args.config, preset=args.preset, **over)
    return cfgmod.resolve(args.preset or "custom", **over)


def cmd_run(args):
    cfg = _resolve(args)
    out = args.out or default_output_dir(cfg)
    summary = run_experiment(cfg, out)
    print(json.dumps(summary, indent=2, sort_keys=True))
    if summary["aborted"]:
        _err(f"run aborted for seeds {summary['aborted']}; partial artifacts in {out}")
        return EXIT_ABORT
    return EXIT_OK


def cmd_plot(args):
    series = []
    for path in args.files:
        try:
            recs = read_trajectory_csv(path)
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        series.append((os.path.splitext(os.path.basename(path))[0], recs))
    write_svg(series, args.out, title=args.title)
    print(args.out)
    return EXIT_OK


def cmd_rfm(args):
    cfg = _resolve(args)
    if cfg.mode != "rfm":
        raise ConfigError(f"preset {cfg.preset} is not an rfm comparison")
    out = args.out or default_output_dir(cfg)
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "config.ini"), "w") as fh:
        fh.write(cfgmod.dumps(cfg))
    summary = run_rfm(cfg, out, full=args.full)
    print(f"{'seed':>4} {'method':>6} {'features':>8} {'eps_rank':>8} {'rel_l2':>10}")
    for r in summary["rows"]:
        print(f"{r['seed']:>4} {r['method']:>6} {r['features']:>8} {r['eps_rank']:>8} {r['rel_l2_error']:>10.3e}")
    return EXIT_OK


def cmd_theory_compress(args):
    rng = np.random.default_rng(args.seed)
    grid = build_grid((-1.0, 1.0), "gauss", args.m)
    x = grid.points
    a = rng.uniform(-args.scale, args.scale, args.n)
    b = rng.uniform(-args.scale, args.scale, args.n)
    F = np.tanh(x * a + b)
    beta = rng.standard_normal(args.n)
    beta /= np.linalg.norm(beta)
    res = compress(F, beta, grid, args.epsilon)
    print(res.to_json())
    return EXIT_OK


def cmd_theory_probe(args):
    res = probe_lemma(args.n, args.p, args.trials, args.seed)
    print(res.to_json())
    return EXIT_OK if res.violations == 0 else 1


def build_parser():
    parser = argparse.ArgumentParser(prog="epsrank", description="epsilon-rank experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    def run_opts(p):
        p.add_argument("--preset", help="named preset: " + ", ".join(cfgmod.preset_names()))
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, action="append", help="seed (repeatable; overrides the config)")
        p.add_argument("--steps", type=int)
        p.add_argument("--workers", type=int, help="seed worker processes; 0 uses every CPU")
        p.add_argument("--out", help="output directory (default $EPSRANK_OUTPUT_ROOT/<preset>)")

    p = sub.add_parser("run", help="train a preset or config and record trajectories")
    run_opts(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("plot", help="render trajectory CSVs to SVG")
    p.add_argument("files", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--title", default="loss and epsilon-rank")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("rfm-compare", help="ELM versus RFM rank and error")
    run_opts(p)
    p.add_argument("--full", action="store_true", help="3 x 3 cells with 900 features")
    p.set_defaults(func=cmd_rfm, preset="ex3.2")

    p = sub.add_parser("theory", help="compression certificate and lemma probe")
    tsub = p.add_subparsers(dest="theory_command", required=True)
    c = tsub.add_parser("compress", help="compress a random tanh feature set")
    c.add_argument("--n", type=int, default=10)
    c.add_argument("--m", type=int, default=64, help="Gauss nodes")
    c.add_argument("--scale", type=float, default=3.0)
    c.add_argument("--epsilon", type=float, default=1e-6)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_theory_compress)
    q = tsub.add_parser("probe", help="sample Haar matrices against the subset bound")
    q.add_argument("--n", type=int, default=6)
    q.add_argument("--p", type=int, default=3)
    q.add_argument("--trials", type=int, default=10000)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=cmd_theory_probe)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, EpsRankError, ValueError) as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
