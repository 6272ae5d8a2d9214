"""Command line: ``gen``, ``solve``, ``sweep`` and ``plot``.

Exit codes: 0 success, 2 configuration or input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

import numpy as np

from . import abb, bench, bnb
from .detectors import METHODS, detect
from .model import generate_instance, load_instance, save_instance

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    return v


def _add_solver_flags(p):
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--time-limit-ms", type=float, default=None)
    p.add_argument("--integrality-tol", type=float, default=None)
    p.add_argument("--violation-tol", type=float, default=None)
    p.add_argument("--incumbent-shortcut", choices=("on", "off"), default=None)
    p.add_argument("--mode", choices=("alg1", "alg2"), default=None)


def _solver_options(args) -> bnb.SolverOptions:
    opts = bnb.SolverOptions()
    for name in ("node_limit", "time_limit_ms", "integrality_tol", "violation_tol", "mode"):
        v = getattr(args, name)
        if v is not None:
            setattr(opts, name, v)
    if args.incumbent_shortcut is not None:
        opts.incumbent_shortcut = args.incumbent_shortcut == "on"
    return opts


def _cmd_gen(args) -> int:
    inst = generate_instance(args.m_tilde, args.n_tilde, args.snr_db, args.seed)
    save_instance(inst, args.out)
    return EXIT_OK


def _cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read instance: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.method not in METHODS:
        print(f"error: unknown method {args.method!r}", file=sys.stderr)
        return EXIT_CONFIG
    params = abb.AbbParams.defaults(inst) if args.method == "AR-L1-ABB" else None
    try:
        res = detect(args.method, inst, seed=args.seed, bnb_options=_solver_options(args), abb_params=params)
    except Exception as exc:
        print(f"error: solver failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    out = {
        "method": res.method,
        "x_hat": res.x_hat.tolist(),
        "objective": res.objective,
        "stats": {k: _jsonable(v) for k, v in res.stats.items()},
    }
    if inst.x_true is not None:
        out["bit_errors"], out["bits"] = bench.ber(res.x_hat, inst.x_true)
    print(json.dumps(out))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    overrides = {}
    for f in dataclasses.fields(bench.ExperimentConfig):
        v = getattr(args, f"cfg_{f.name}", None)
        if v is not None:
            overrides[f.name] = v
    try:
        cfg = bench.load_config(args.config, overrides)
    except (bench.ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if not cfg.output_path:
        print("error: output_path is required for a sweep", file=sys.stderr)
        return EXIT_CONFIG
    records = bench.run_experiment(cfg)
    for s in bench.summarize(records):
        print(f"{s.method:10s} M~={s.m_tilde:<3d} N~={s.n_tilde:<3d} snr={s.snr_db:5.1f}  "
              f"ber={s.extra['ber']:.3e}  mean_time_us={s.wall_time_us}")
    failed = sum(r.status.startswith("error") for r in records)
    if failed:
        print(f"{failed} trial(s) failed; see the status column", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def _cmd_plot(args) -> int:
    spec = bench.default_plot_spec(args.experiment) if args.experiment else bench.PlotSpec()
    if args.x:
        spec.x = args.x
    if args.y:
        spec.y = args.y
    if args.log_y is not None:
        spec.log_y = args.log_y == "on"
    if args.title is not None:
        spec.title = args.title
    try:
        bench.emit_svg_plot(args.csv, spec, args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onebit", description="One-bit MIMO detection experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="write a random instance as JSON")
    p.add_argument("--m-tilde", type=int, required=True)
    p.add_argument("--n-tilde", type=int, required=True)
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("solve", help="run one method on one instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--method", required=True, help=", ".join(METHODS))
    p.add_argument("--seed", type=int, default=0, help="seed of the ABB start point")
    _add_solver_flags(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("sweep", help="run an experiment described by a config file")
    p.add_argument("--config", default=None, help="flat key = value file")
    for f in dataclasses.fields(bench.ExperimentConfig):
        p.add_argument("--" + f.name.replace("_", "-"), dest=f"cfg_{f.name}", default=None, metavar="VALUE")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("plot", help="render a sweep CSV as SVG")
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--experiment", choices=bench.EXPERIMENTS, default=None)
    p.add_argument("--x", default=None)
    p.add_argument("--y", default=None)
    p.add_argument("--log-y", choices=("on", "off"), default=None)
    p.add_argument("--title", default=None)
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    return args.func(args)
