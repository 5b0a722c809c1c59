"""Command-line front end: single runs, figure sweeps and trace checking.

Exit codes: 0 success, 1 trace violations or internal failure, 2 usage
errors, 3 configuration errors, 4 I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import sweep as sweep_mod
from .config import (ConfigError, SimConfig, default_config_dir,
                     load_sim_config, resolve_standard)
from .engine import run as run_engine
from .trace import MalformedTrace, read_trace, validate_trace, write_trace

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4


def _locate_config(name: str) -> Path:
    """A bare file name is searched in the default config directory
    (overridable through LPDDRSIM_CONFIG_DIR)."""
    path = Path(name)
    if path.exists():
        return path
    fallback = default_config_dir() / name
    if fallback.exists():
        return fallback
    raise FileNotFoundError(f"config file not found: {name}")


def _overrides_from_args(args) -> dict:
    device = {}
    if args.standard:
        device["standard"] = args.standard
    if args.data_rate:
        device["data_rate"] = args.data_rate
    if args.bank_mode:
        device["bank_mode"] = args.bank_mode
    if args.burst_length:
        device["burst_length"] = args.burst_length
    traffic = {}
    if args.traffic:
        traffic["pattern"] = "sequential" if args.traffic == "seq" else args.traffic
    if args.rw_ratio is not None:
        traffic["read_ratio"] = args.rw_ratio
    if args.seed is not None:
        traffic["seed"] = args.seed
    if args.requests is not None:
        traffic["request_budget"] = args.requests
    return {"device": device, "traffic": traffic}


def _build_sim_config(args) -> SimConfig:
    path = _locate_config(args.config) if args.config else None
    return load_sim_config(path, _overrides_from_args(args))


def _cmd_run(args) -> int:
    sim = _build_sim_config(args)
    result = run_engine(sim, collect_trace=args.trace is not None)
    report = result.report
    if args.trace:
        write_trace(result.trace, args.trace)
    if args.format == "json":
        text = report.to_json() + "\n"
    else:
        text = sweep_mod.emit_csv([report])
    if args.out:
        Path(args.out).write_text(text)
        print(sweep_mod.emit_csv([report]), end="")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    if args.figure:
        spec = sweep_mod.figure_sweep(args.figure,
                                      request_budget=args.requests or 100_000,
                                      seeds=(args.seed if args.seed is not None
                                             else 1,))
    else:
        raise ConfigError("sweep requires --figure (1a, 1b, 1c or 1d)")
    jobs = args.jobs or os.cpu_count() or 1
    reports = sweep_mod.run_sweep(spec, jobs=jobs)
    if args.format == "json":
        import json
        text = json.dumps([r.__dict__ for r in reports], indent=2,
                          sort_keys=True, default=str) + "\n"
    else:
        text = sweep_mod.emit_csv(reports)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(reports)} points to {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def _cmd_validate_trace(args) -> int:
    sim = _build_sim_config(args)
    records = read_trace(args.trace)
    violations = validate_trace(records, sim)
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s) in {len(records)} records")
    return EXIT_OK if not violations else EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpddrsim",
        description="Cycle-accurate LPDDR4/LPDDR5 bandwidth simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="config file (bare names are looked "
                                        "up in the default config directory)")
        p.add_argument("--standard", choices=["lpddr4", "lpddr5"])
        p.add_argument("--data-rate", type=int, dest="data_rate",
                       help="data rate in MT/s")
        p.add_argument("--bank-mode", choices=["8b", "16b", "bg"],
                       dest="bank_mode")
        p.add_argument("--burst-length", type=int, choices=[16, 32],
                       dest="burst_length")
        p.add_argument("--traffic", choices=["seq", "sequential", "random"])
        p.add_argument("--rw-ratio", type=float, dest="rw_ratio",
                       help="fraction of reads (0..1)")
        p.add_argument("--seed", type=int)
        p.add_argument("--requests", type=int,
                       help="measured requests per point")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--out", help="output file path")

    p_run = sub.add_parser("run", help="simulate one configuration")
    common(p_run)
    p_run.add_argument("--trace", help="write the command trace here")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a figure preset sweep")
    common(p_sweep)
    p_sweep.add_argument("--figure", choices=sorted(sweep_mod.FIGURE_PRESETS))
    p_sweep.add_argument("--jobs", type=int,
                         help="parallel worker processes (default: all cores)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_val = sub.add_parser("validate-trace",
                           help="check a command trace for violations")
    common(p_val)
    p_val.add_argument("--trace", required=True, help="trace file to check")
    p_val.set_defaults(func=_cmd_validate_trace)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("LPDDRSIM_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, MalformedTrace) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
