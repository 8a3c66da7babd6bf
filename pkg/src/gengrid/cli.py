"""Command-line entry point: run experiments, calibrate noise, serve a live
session, list the bundled scenarios."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from .scenarios import (
    BUILTIN_NAMES,
    ScenarioError,
    builtin_scenarios,
    calibrate_noise,
    find_scenario,
    run_experiment,
)
from .telemetry import TelemetryError, export_report

USAGE_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gengrid",
        description="Simulated swarm-robotics light-grid platform.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario's trials and report aggregates")
    run_p.add_argument("--scenario", required=True, help="builtin name or path to a .scn file")
    run_p.add_argument("--trials", type=int, default=None, help="override the trial count")
    run_p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    run_p.add_argument("--noiseless", action="store_true", help="disable actuation noise")
    run_p.add_argument("--out", default=None, metavar="DIR", help="export report files here")

    cal_p = sub.add_parser("calibrate", help="search noise parameters for the target rates")
    cal_p.add_argument("--budget", type=int, default=24, help="search evaluations")
    cal_p.add_argument("--trials", type=int, default=500, help="trials per evaluation")
    cal_p.add_argument("--seed", type=int, default=20260810)
    cal_p.add_argument("--write", default=None, metavar="PATH",
                       help="write the calibrated model to this JSON file")

    serve_p = sub.add_parser("serve", help="serve a live session for interactive steering")
    serve_p.add_argument("--scenario", required=True)
    serve_p.add_argument("--listen", default="127.0.0.1:8089", metavar="HOST:PORT")
    serve_p.add_argument("--frame-every", type=int, default=5, help="ticks between frames")
    serve_p.add_argument("--log", default=None, metavar="PATH",
                         help="record the command log for replay")

    sub.add_parser("list", help="print the bundled scenario names")
    return parser


def _cmd_run(args) -> int:
    try:
        spec = find_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"gengrid: {exc}", file=sys.stderr)
        return USAGE_ERROR
    if args.seed is not None:
        spec = spec.with_overrides(seed=args.seed)
    started = time.perf_counter()
    report = run_experiment(spec, trials=args.trials, noiseless=args.noiseless)
    elapsed = time.perf_counter() - started
    total = report.trials_per_variant * report.variant_count
    print(f"scenario={report.scenario} trials={total} "
          f"success_rate={report.success_rate:.4f} elapsed={elapsed:.1f}s")
    if spec.robots and report.variant_count > 1:
        for i, rate in enumerate(report.per_variant_success):
            start = spec.variants()[i]
            print(f"  start ({start.row},{start.col}) heading {start.heading.name}: "
                  f"success {rate:.4f}")
    if report.safe_time_fraction is not None:
        print(f"  safe_time_fraction={report.safe_time_fraction:.4f}")
    if args.out:
        try:
            written = export_report(report, args.out)
        except TelemetryError as exc:
            print(f"gengrid: {exc}", file=sys.stderr)
            return 1
        for path in written:
            print(f"wrote {path}")
    return 0


def _cmd_calibrate(args) -> int:
    result = calibrate_noise(budget=args.budget, trials=args.trials, seed=args.seed)
    print(f"sigma_rot={result.model.sigma_rot:.4f} "
          f"sigma_drive={result.model.sigma_drive:.5f} "
          f"achieved single_hop={result.achieved['single_hop']:.3f} "
          f"path={result.achieved['path']:.3f} residual={result.residual}")
    if args.write:
        payload = {
            "sigma_rot": result.model.sigma_rot,
            "sigma_drive": result.model.sigma_drive,
            "duty_mismatch": result.model.duty_mismatch,
            "achieved": result.achieved,
            "trials": args.trials,
            "seed": args.seed,
        }
        Path(args.write).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        print(f"wrote {args.write}")
    return 1 if result.residual else 0


def _cmd_serve(args) -> int:
    from . import bridge  # lazy: pulls in websockets

    try:
        spec = find_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"gengrid: {exc}", file=sys.stderr)
        return USAGE_ERROR
    host, _, port_text = args.listen.rpartition(":")
    if not host or not port_text.isdigit():
        print(f"gengrid: bad --listen address {args.listen!r}", file=sys.stderr)
        return USAGE_ERROR
    try:
        bridge.serve_forever(spec, host, int(port_text),
                             frame_every=args.frame_every, log_path=args.log)
    except OSError as exc:
        print(f"gengrid: cannot serve on {args.listen}: {exc}", file=sys.stderr)
        return 1
    return 0


def _cmd_list(_args) -> int:
    for spec in builtin_scenarios():
        print(spec.name)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "calibrate": _cmd_calibrate,
        "serve": _cmd_serve,
        "list": _cmd_list,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
