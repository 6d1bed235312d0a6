"""Command-line front end: stability checks, analytic solves, simulation, sweeps.

Single-point commands print JSON; sweeps write CSV (one row per grid point)
and render companion matplotlib figures next to the CSV.

Exit codes: 0 ok, 2 invalid parameters, 3 unstable where stability is required.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import erlang_loss, measures, plotting, qbd
from .des import SimConfig, simulate
from .model import InvalidParams, SystemParams, distribution_from_spec, validate
from .qbd import NotConverged, Unstable

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNSTABLE = 3


@dataclass(frozen=True)
class SweepSpec:
    varying: str          # "l1", "l2", or "c"
    grid: tuple
    mode: str             # "analytic", "simulate", or "both"


def _read_config(path: str) -> dict:
    """Flat key=value file mirroring the CLI flags; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParams("config", f"bad config line: {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key.replace("-", "_")] = val
    return values


def _add_common(parser):
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--l1", type=float, default=None, help="class-1 arrival rate")
    parser.add_argument("--l2", type=float, default=None, help="class-2 arrival rate")
    parser.add_argument("--m1", type=float, default=None, help="class-1 service rate")
    parser.add_argument("--m2", type=float, default=None, help="class-2 service rate")
    parser.add_argument("--c", type=int, default=None, help="number of servers")
    parser.add_argument("--format", choices=("json", "csv"), default="json")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")


def _add_sim_flags(parser):
    parser.add_argument("--dist1", default="exp", help="class-1 service law: exp, erlang:R, det")
    parser.add_argument("--dist2", default="exp", help="class-2 service law: exp, erlang:R, det")
    parser.add_argument("--horizon", type=float, default=1e6)
    parser.add_argument("--warmup", type=float, default=None)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prioloss",
        description="Two-class preemptive-priority multiserver queue: "
                    "matrix-analytic solver and discrete-event simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stability", help="evaluate the ergodicity condition")
    _add_common(p)

    p = sub.add_parser("analyze", help="solve the QBD and report stationary measures")
    _add_common(p)
    p.add_argument("--tail-k", type=int, nargs="*", default=[1, 5, 10],
                   help="queue-length tail probabilities P(Q2 >= k) to report")
    p.add_argument("--dump-matrices", default=None, metavar="DIR",
                   help="write C, A_n, B_n, R as CSV into DIR")

    p = sub.add_parser("simulate", help="discrete-event simulation with CIs")
    _add_common(p)
    _add_sim_flags(p)

    p = sub.add_parser("sweep", help="parameter sweep to CSV (+ figures)")
    _add_common(p)
    _add_sim_flags(p)
    p.add_argument("--sweep", required=True, metavar="PARAM:START:STOP:STEP",
                   help="grid, e.g. l1:0:10:0.5 or l2:5,10,20,40 (param in l1,l2,c)")
    p.add_argument("--mode", choices=("analytic", "simulate", "both"), default="analytic")
    p.add_argument("--workers", type=int, default=None)
    return parser


_CONFIG_CASTS = {"l1": float, "l2": float, "m1": float, "m2": float, "c": int,
                 "horizon": float, "warmup": float, "seed": int, "reps": int,
                 "tail_k": lambda s: [int(v) for v in s.split(",")]}


def _apply_config(parser: argparse.ArgumentParser, argv):
    """Pre-scan for --config and install its values as parser defaults, so
    explicit flags always override the file."""
    # allow_abbrev must be off or the probe would swallow --c as --config
    probe = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    probe.add_argument("--config", default=None)
    known, _ = probe.parse_known_args(argv)
    if known.config:
        conf = _read_config(known.config)
        defaults = {k: _CONFIG_CASTS.get(k, str)(v) for k, v in conf.items()}
        for action in parser._subparsers._group_actions[0].choices.values():
            action.set_defaults(**defaults)


def _params_from(args) -> SystemParams:
    missing = [k for k in ("l2", "m2", "c") if getattr(args, k) is None]
    if missing:
        raise InvalidParams(missing[0], f"missing required parameter --{missing[0]}")
    l1 = args.l1 if args.l1 is not None else 0.0
    m1 = args.m1 if args.m1 is not None else 1.0   # irrelevant when l1 == 0
    if args.l1 not in (None, 0.0) and args.m1 is None:
        raise InvalidParams("m1", "missing required parameter --m1")
    return validate(SystemParams(lambda1=l1, lambda2=args.l2,
                                 mu1=m1, mu2=args.m2, c=args.c))


def _emit(text: str, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def cmd_stability(args) -> int:
    params = _params_from(args)
    report = erlang_loss.stability(params)
    doc = report.to_dict()
    verdict = "stable" if report.stable else "UNSTABLE"
    print(f"{verdict}: rho2 = {report.rho2:.6g}, Delta = {report.delta:.6g}, "
          f"lambda_max = {report.lambda_max:.6g}, margin = {report.margin:.6g}",
          file=sys.stderr)
    _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    params = _params_from(args)
    stab = erlang_loss.stability(params)
    if not stab.stable:
        print(f"unstable: lambda2 = {params.lambda2:.6g} >= "
              f"lambda_max = {stab.lambda_max:.6g}", file=sys.stderr)
        return EXIT_UNSTABLE
    solution = qbd.solve(params)
    if args.dump_matrices:
        qbd.dump_matrices(solution.blocks, solution.R, args.dump_matrices)
    report = measures.performance_report(solution, tail_ks=tuple(args.tail_k))
    doc = report.to_dict()
    doc["stability"] = stab.to_dict()
    doc["spectral_radius_R"] = solution.spectral_radius_R
    doc["residuals"] = solution.residuals
    _emit(json.dumps(doc, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def _sim_config(args, params) -> SimConfig:
    return SimConfig(
        params=params,
        service1=distribution_from_spec(args.dist1, params.mu1),
        service2=distribution_from_spec(args.dist2, params.mu2),
        horizon=args.horizon,
        warmup=args.warmup,
        seed=args.seed,
        replications=args.reps,
    )


def cmd_simulate(args) -> int:
    params = _params_from(args)
    report = simulate(_sim_config(args, params))
    _emit(report.to_json(), args.out)
    if args.out:
        base = args.out.rsplit(".", 1)[0]
        hist_path = base + "_histogram.csv"
        with open(hist_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "probability"])
            for k, pk in enumerate(report.termination_histogram):
                if pk > 0:
                    writer.writerow([k, repr(float(pk))])
        if not args.no_plot:
            plotting.histogram_figure(report.termination_histogram, base + "_histogram.png")
    return EXIT_OK


def parse_sweep(spec: str) -> tuple:
    """'l1:0:10:0.5' or 'l2:5,10,20' -> (varying, grid tuple)."""
    parts = spec.split(":")
    varying = parts[0]
    if varying not in ("l1", "l2", "c"):
        raise InvalidParams("sweep", f"sweep parameter must be l1, l2, or c, got {varying!r}")
    if len(parts) == 2 and "," in parts[1]:
        vals = [float(v) for v in parts[1].split(",") if v != ""]
    elif len(parts) == 4:
        start, stop, step = (float(p) for p in parts[1:])
        if step <= 0:
            raise InvalidParams("sweep", "step must be > 0")
        n = int(round((stop - start) / step)) + 1
        vals = [start + k * step for k in range(n) if start + k * step <= stop + 1e-12]
    else:
        raise InvalidParams("sweep", f"bad sweep spec {spec!r}")
    if not vals:
        raise InvalidParams("sweep", "empty sweep grid")
    if varying == "c":
        vals = [int(round(v)) for v in vals]
    return varying, tuple(vals)


SWEEP_COLUMNS = [
    "param", "value", "stable", "lambda_max",
    "mean_wait", "mean_terminations", "throughput",
    "mean_wait_sim", "mean_wait_sim_hw",
    "mean_terminations_sim", "mean_terminations_sim_hw",
    "throughput_sim", "throughput_sim_hw",
]


def _sweep_point(args, varying, value) -> dict:
    ns = argparse.Namespace(**vars(args))
    setattr(ns, varying, value)
    params = _params_from(ns)
    stab = erlang_loss.stability(params)
    row = {k: "" for k in SWEEP_COLUMNS}
    row.update(param=varying, value=repr(float(value)) if varying != "c" else value,
               stable=int(stab.stable), lambda_max=repr(stab.lambda_max))
    if args.mode in ("analytic", "both"):
        if stab.stable:
            try:
                solution = qbd.solve(params)
                row["mean_wait"] = repr(measures.mean_waiting(solution))
                row["mean_terminations"] = repr(measures.mean_terminations(solution))
            except (Unstable, NotConverged):
                row["mean_wait"] = row["mean_terminations"] = "unstable"
        else:
            row["mean_wait"] = row["mean_terminations"] = "unstable"
        row["throughput"] = repr(measures.throughput(params))
    if args.mode in ("simulate", "both"):
        report = simulate(_sim_config(args, params), max_workers=1)
        row["mean_wait_sim"] = repr(report.mean_wait.value)
        row["mean_wait_sim_hw"] = repr(report.mean_wait.half_width)
        row["mean_terminations_sim"] = repr(report.mean_terminations.value)
        row["mean_terminations_sim_hw"] = repr(report.mean_terminations.half_width)
        row["throughput_sim"] = repr(report.throughput.value)
        row["throughput_sim_hw"] = repr(report.throughput.half_width)
    return row


def cmd_sweep(args) -> int:
    varying, grid = parse_sweep(args.sweep)
    # validate the fixed parameters up front with the first grid value in place
    probe = argparse.Namespace(**vars(args))
    setattr(probe, varying, grid[0])
    _params_from(probe)
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(lambda v: _sweep_point(args, varying, v), grid))

    writer_target = []

    class _Collector:
        def write(self, text):
            writer_target.append(text)

    writer = csv.DictWriter(_Collector(), fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    text = "".join(writer_target)
    _emit(text, args.out)
    if args.out and not args.no_plot:
        plotting.sweep_figure(rows, varying, args.out.rsplit(".", 1)[0] + ".png")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    _apply_config(parser, argv if argv is not None else sys.argv[1:])
    args = parser.parse_args(argv)
    handlers = {
        "stability": cmd_stability,
        "analyze": cmd_analyze,
        "simulate": cmd_simulate,
        "sweep": cmd_sweep,
    }
    try:
        return handlers[args.command](args)
    except InvalidParams as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Unstable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE


if __name__ == "__main__":
    sys.exit(main())
