"""Command-line entry point ``bvmlab``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 finished but some tasks produced error rows.
"""

import argparse
import json
import sys

import numpy as np

from . import diagnostics as dg
from .empirical_likelihood import MomentModel, profile_q
from .exceptions import BvmLabError, ConfigInvalid
from .harness import (
    CURVED_FAMILIES,
    ExperimentConfig,
    _growth_cell,
    _metric_name,
    atomic_write,
    build_family,
    emit_plotdata,
    is_error_record,
    run,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_ERROR_ROWS = 0, 1, 2, 3

GROUPS = {
    "diagnose": ("lambda-curve", "a-n", "moment-bounds"),
    "tv-sweep": ("tv", "alpha-moment"),
    "curved-sweep": ("tv", "mle-rate", "tail-mass"),
    "audit": ("lemma-audits",),
}


def _common(p):
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json", "both"), default="csv")
    p.add_argument("--timing", action="store_true", help="record wall-clock time per task")
    p.add_argument("--plot", default=None, metavar="METRIC",
                   help="also write gnuplot-style data for METRIC against n, grouped by d")


def build_parser():
    parser = argparse.ArgumentParser(prog="bvmlab", description="Posterior normality diagnostics and sweeps.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("diagnose", "lambda curve, a_n and moment bounds"),
        ("tv-sweep", "total-variation and moment-weighted distances"),
        ("curved-sweep", "curved-family distances, MLE error and tail mass"),
        ("audit", "pointwise and integrated lemma audits"),
        ("growth", "dimension-growth ratios and their trend"),
    ]:
        _common(sub.add_parser(name, help=help_text))
    el = sub.add_parser("el-solve", help="solve one moment-restricted multinomial problem")
    el.add_argument("--config", default=None, help="JSON with support, moment, d1, eta, weights")
    el.add_argument("--support", type=float, nargs="+", help="scalar support points")
    el.add_argument("--moment", default="mean")
    el.add_argument("--eta", type=float, nargs="+")
    el.add_argument("--weights", type=float, nargs="+", default=None)
    return parser


def _load(args, command):
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigInvalid(["--seed must be nonnegative"])
        config.seed = args.seed
    if args.workers < 1:
        raise ConfigInvalid(["--workers must be at least 1"])
    if command in GROUPS:
        allowed = GROUPS[command]
        kept = [m for m in config.metrics if _metric_name(m) in allowed]
        if command == "curved-sweep" and config.family not in CURVED_FAMILIES:
            raise ConfigInvalid([f"family: curved-sweep needs one of {', '.join(CURVED_FAMILIES)}"])
        if not kept:
            raise ConfigInvalid([f"metrics: none of {list(allowed)} requested for {command}"])
        config.metrics = kept
    return config


def _sweep(args, command):
    config = _load(args, command)
    records = run(config, args.out, args.format, args.workers, args.timing)
    if args.out and args.plot:
        emit_plotdata(records, f"{args.out}/{config.experiment}-{args.plot}.dat", "n", args.plot, ("d",))
    for r in records:
        print(f"{r.family} d={r.d} n={r.n} rep={r.replicate} {r.metric} = {r.value:.6g} (+/- {r.error:.2g})")
    return EXIT_ERROR_ROWS if any(is_error_record(r) for r in records) else EXIT_OK


def _growth(args):
    config = _load(args, "growth")
    params = config.params or {}
    mp = next((m["growth"] for m in config.metrics if isinstance(m, dict) and "growth" in m), None) or {}
    cells = []
    for cell in config.sweep:
        obj = build_family(config.family, cell, params)
        cells.append(_growth_cell(config.family, cell, obj))
    report = dg.growth_check({"name": config.experiment, "family": config.family, "cells": cells}, mp)
    out = {"regime": report.regime_name, "ratios": dict(report.ratios), "verdicts": report.verdicts}
    text = json.dumps(out, indent=1, sort_keys=True)
    if args.out:
        atomic_write(f"{args.out}/{config.experiment}-growth.json", text + "\n")
    print(text)
    return EXIT_OK


def _el_solve(args):
    if args.config:
        with open(args.config) as fh:
            spec = json.load(fh)
    else:
        spec = {"support": args.support, "moment": args.moment, "eta": args.eta, "weights": args.weights}
    if spec.get("support") is None or spec.get("eta") is None:
        raise ConfigInvalid(["el-solve needs support and eta"])
    eta = np.atleast_1d(np.asarray(spec["eta"], dtype=float))
    model = MomentModel(spec["support"], spec.get("moment", "mean"), int(spec.get("d1", eta.size)),
                        weights=spec.get("weights"), params=spec.get("params", {}))
    sol = profile_q(model, eta)
    print("q          =", " ".join(format(v, ".12g") for v in sol.q))
    print("multiplier =", " ".join(format(v, ".12g") for v in sol.multiplier))
    print(f"objective  = {sol.objective:.12g}")
    print(f"status     = {sol.status} after {sol.iterations} iterations")
    print("KKT residuals:")
    for k, v in sol.kkt.items():
        print(f"  {k:<13}{v:.3e}")
    theta = np.log(sol.q[1:]) - np.log(sol.q[0])
    print("theta      =", " ".join(format(v, ".12g") for v in theta))
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "el-solve":
            return _el_solve(args)
        if args.command == "growth":
            return _growth(args)
        return _sweep(args, args.command)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BvmLabError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
