"""Command line entry point.

Subcommands: ``run <config>``, ``bias <config>``, ``sweep <config> --axis
<name> --values <list>``, ``presets list``, ``problem dump <name>``. The
config argument is a file path or ``preset:<name>``. Exit codes: 0 success,
2 config error, 3 every run diverged, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ConfigError, make_problem, parse_config
from .presets import PRESET_NOTES, PRESETS, preset_config
from .runner import run_bias_protocol, run_experiment, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _load_config(arg: str):
    if arg.startswith("preset:"):
        name = arg[len("preset:"):]
        try:
            text = preset_config(name)
        except KeyError as exc:
            print(f"error: {exc}", file=sys.stderr)
            raise SystemExit(EXIT_CONFIG)
    else:
        try:
            with open(arg) as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            raise SystemExit(EXIT_IO)
    try:
        return parse_config(text)
    except ConfigError as exc:
        print("config errors:", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _cmd_run(args) -> int:
    cfg = _load_config(args.config)
    try:
        result = run_experiment(cfg, workers=args.workers)
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for path, rec in zip(result.paths, result.records):
        tag = " (diverged)" if rec.diverged else ""
        print(f"wrote {path}  rows={rec.ks.size}{tag}")
    print(f"wrote {result.meta_path}")
    return EXIT_DIVERGED if result.all_diverged else EXIT_OK


def _cmd_bias(args) -> int:
    cfg = _load_config(args.config)
    try:
        result = run_bias_protocol(cfg, workers=args.workers)
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in result.paths:
        print(f"wrote {path}")
    print(f"wrote {result.meta_path}")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    values = [v for v in args.values.split(",") if v.strip()]
    try:
        values = [float(v) for v in values]
    except ValueError:
        print(f"error: --values must be numeric, got {args.values!r}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = sweep(cfg, args.axis, values, workers=args.workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    for row in summary["rows"]:
        print(f"{args.axis}={row['value']:g}  running_mean={row['running_mean']:.6g} "
              f"+- {row['running_stderr']:.2g}  final={row['final_mean']:.6g}")
    if "loglog_slope" in summary:
        print(f"log-log slope: {summary['loglog_slope']:.4f}")
    print(f"wrote {summary['json_path']}")
    return EXIT_OK


def _cmd_presets(args) -> int:
    if args.action == "list":
        width = max(len(n) for n in PRESETS)
        for name in PRESETS:
            print(f"{name:<{width}}  {PRESET_NOTES.get(name, '')}")
        return EXIT_OK
    print(f"error: unknown presets action {args.action!r}", file=sys.stderr)
    return EXIT_CONFIG


def _cmd_problem(args) -> int:
    if args.action != "dump":
        print(f"error: unknown problem action {args.action!r}", file=sys.stderr)
        return EXIT_CONFIG
    text = (
        f"problem = {args.name}\n"
        f"dim = {args.dim}\n"
        f"objectives = {args.objectives}\n"
        f"instance_seed = {args.instance_seed}\n"
        "method = mgda\nK = 1\n"
    )
    try:
        cfg = parse_config(text)
        problem = make_problem(cfg)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    dump = {"problem": args.name, "d": problem.d, "M": problem.M}
    if args.name == "toy":
        dump["variant"] = "corrected"
        dump["log_guard"] = 5e-6
    else:
        dump["instance_seed"] = args.instance_seed
        dump["A"] = np.asarray(problem.A).tolist()
        dump["b"] = np.asarray(problem.b).tolist()
    json.dump(dump, sys.stdout, indent=2, sort_keys=True)
    print()
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="moco",
        description="Experiment runner for stochastic multi-objective gradient methods.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute the runs described by a config")
    p_run.add_argument("config", help="config file path or preset:<name>")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.set_defaults(func=_cmd_run)

    p_bias = sub.add_parser("bias", help="bias-measurement protocol along a trajectory")
    p_bias.add_argument("config")
    p_bias.add_argument("--workers", type=int, default=1)
    p_bias.set_defaults(func=_cmd_bias)

    p_sweep = sub.add_parser("sweep", help="run a config over several values of one field")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--axis", required=True)
    p_sweep.add_argument("--values", required=True, help="comma-separated numbers")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_presets = sub.add_parser("presets", help="list named presets")
    p_presets.add_argument("action", choices=["list"])
    p_presets.set_defaults(func=_cmd_presets)

    p_problem = sub.add_parser("problem", help="dump a problem instance as JSON")
    p_problem.add_argument("action", choices=["dump"])
    p_problem.add_argument("name")
    p_problem.add_argument("--dim", type=int, default=10)
    p_problem.add_argument("--objectives", type=int, default=3)
    p_problem.add_argument("--instance-seed", type=int, default=0)
    p_problem.set_defaults(func=_cmd_problem)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
