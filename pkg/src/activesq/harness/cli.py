"""Command-line entry point: ``activesq <command> ...``."""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import math
import sys
from pathlib import Path

from ..core import ActiveSQError, NoiseModel, RngStream, UnitVector
from ..distributions import HalfspaceTarget, LabeledSource, Marginal
from ..geometry import CpdContext, cpd_eval
from ..learners import NoiseRateTrace, estimate_noise_rate
from ..oracles import PrivateDatabase
from .config import SEED_ENV, load_config
from .experiment import ExperimentReport, run_experiment


def _pairs(items: list[str] | None) -> dict[str, str]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise SystemExit(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _config(args, extra: dict[str, str] | None = None):
    overrides = _pairs(args.set)
    if extra:
        overrides.update(extra)
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    return load_config(args.config, overrides)


def _emit(report: ExperimentReport, args) -> None:
    text = report.to_json(include_timing=args.timing)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    agg = report.aggregate()
    print(
        f"trials={agg['trials']} completed={agg['completed']} success={agg['success_fraction']:.3f} "
        f"median_labels={agg['median_labels']:.0f} p90_labels={agg['p90_labels']:.0f}",
        file=sys.stderr,
    )


def cmd_learn(args) -> int:
    report = run_experiment(_config(args))
    _emit(report, args)
    return 0 if report.completed else 1


def cmd_sweep(args) -> int:
    grid = {}
    for item in args.grid:
        key, values = item.split("=", 1)
        grid[key.strip()] = [v.strip() for v in values.split(",")]
    reports = []
    rows = []
    ok = True
    for combo in itertools.product(*grid.values()):
        point = dict(zip(grid.keys(), combo))
        report = run_experiment(_config(args, point))
        ok &= report.completed
        reports.append({"point": point, **report.to_dict(include_timing=args.timing)})
        rows.extend(report.csv_rows({**point, "seed": report.config["seed"]}))
    text = json.dumps(reports, sort_keys=True, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.csv and rows:
        fieldnames = list(dict.fromkeys(k for row in rows for k in row))
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
    return 0 if ok else 1


def cmd_cpd(args) -> int:
    value = cpd_eval(CpdContext(args.d, args.gamma), args.Delta)
    print(json.dumps({"d": args.d, "gamma": args.gamma, "Delta": args.Delta, "cpd": value}))
    return 0


def cmd_estimate_noise(args) -> int:
    seed = args.seed if args.seed is not None else load_config().seed
    stream = RngStream(seed, (0,))
    target = HalfspaceTarget(UnitVector.random(args.d, stream.child(0).generator()))
    source = LabeledSource(Marginal.sphere(args.d), target, NoiseModel.rcn(args.eta), stream.child(1))
    trace = NoiseRateTrace()
    try:
        eta_hat = estimate_noise_rate(source, args.tau, args.delta, fast=not args.slow, trace=trace)
    except ActiveSQError as err:
        print(json.dumps({"failure": err.code, "detail": str(err)}))
        return 1
    ratio = (1 - 2 * args.eta) / (1 - 2 * eta_hat) if eta_hat < 0.5 else math.inf
    print(json.dumps({
        "eta": args.eta, "eta_hat": eta_hat, "ratio": ratio, "within_tolerance": abs(ratio - 1) <= args.tau,
        "lower_bound_exponent": trace.lower_bound_exponent, "tally": source.tally.as_dict(),
    }, sort_keys=True))
    return 0


def cmd_dp_learn(args) -> int:
    db = PrivateDatabase.from_csv(args.db)
    extra = {"oracle.kind": "dp", "dp.records": str(len(db))}
    if args.alpha is not None:
        extra["dp.alpha"] = str(args.alpha)
    cfg = _config(args, extra)
    if db.dimension != (1 if cfg.learner == "threshold" else cfg.d):
        raise SystemExit(f"database has dimension {db.dimension}, learner expects {cfg.d}")
    report = run_experiment(cfg.with_overrides({"trials": "1"}), db=db)
    trial = report.trials[0]
    trial.detail["records_remaining"] = db.remaining
    _emit(report, args)
    return 0 if report.completed else 1


def cmd_report(args) -> int:
    report = ExperimentReport.from_json(Path(args.report).read_text())
    agg = report.aggregate()
    for key in ("trials", "completed", "success_fraction", "median_labels", "p90_labels"):
        print(f"{key:18s} {agg[key]}")
    failures = [t.failure for t in report.trials if t.failure]
    if failures:
        print(f"{'failures':18s} {', '.join(sorted(set(failures)))}")
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="activesq", description="Active statistical-query learning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_args(p):
        p.add_argument("--config", help="file of key=value lines")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
        p.add_argument("--seed", type=int, help=f"master seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--out", help="write the JSON report here instead of stdout")
        p.add_argument("--csv", help="also write per-trial rows as CSV")
        p.add_argument("--timing", action="store_true", help="include wall time in the JSON report")

    p = sub.add_parser("learn", help="run trials of one configuration")
    experiment_args(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("sweep", help="run the cartesian product of --grid values")
    experiment_args(p)
    p.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cpd-eval", help="evaluate cp_d(gamma, Delta)")
    p.add_argument("d", type=int)
    p.add_argument("gamma", type=float)
    p.add_argument("Delta", type=float)
    p.set_defaults(func=cmd_cpd)

    p = sub.add_parser("estimate-noise", help="estimate a uniform flip rate on the sphere")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--eta", type=float, default=0.2)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int)
    p.add_argument("--slow", action="store_true", help="draw every example instead of simulating counts")
    p.set_defaults(func=cmd_estimate_noise)

    p = sub.add_parser("dp-learn", help="learn privately from a CSV database (features..., label)")
    experiment_args(p)
    p.add_argument("--db", required=True)
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=cmd_dp_learn)

    p = sub.add_parser("report", help="summarise a saved JSON report")
    p.add_argument("report")
    p.add_argument("--csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
