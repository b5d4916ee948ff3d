"""Command-line front end: ``coreshrink [options] [instance]``."""
from __future__ import annotations

import argparse
import os
import sys

from .cdcl import UnsupportedFeature
from .model import CapacityError
from .optimize import StrategyConfig, optimize, strategy_matrix
from .oracle_ref import Budget
from .report import EventCsvWriter, EventLog, ProtocolWriter, bench, write_csv
from .textio import ParseError, read_instance

EXIT = {"OPTIMUM": 0, "SATISFIABLE": 10, "INCOHERENT": 20, "UNKNOWN": 30}
EXIT_USAGE = 2


def _budget(text: str) -> Budget:
    try:
        b = Budget.parse(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None
    if b.amount <= 0:
        raise argparse.ArgumentTypeError("budget must be positive")
    return b


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="coreshrink",
        description="Anytime optimum stable model search for ground programs with weak constraints.",
    )
    p.add_argument("input", nargs="?", default="-", help="instance file, '-' for stdin")
    p.add_argument("--format", choices=("asp", "wcnf"), help="input dialect (default: detect)")
    p.add_argument("--algorithm", choices=("linsu", "one"), default="one")
    p.add_argument("--shrink", choices=("none", "linear", "progression"),
                   help="core shrinking (default: progression for one)")
    p.add_argument("--disjoint-cores", action="store_true")
    p.add_argument("--no-stratification", action="store_true")
    p.add_argument("--compile-levels", action="store_true", help="fold levels into weights")
    p.add_argument("--shrink-budget", type=_budget, default=Budget("seconds", 10),
                   metavar="N{s|c}", help="budget per shrinking probe, seconds or conflicts (default 10s)")
    p.add_argument("--oracle", choices=("cdcl", "enum"), default="cdcl")
    p.add_argument("--core-mode", choices=("raw", "minimal"), default="raw", help="cores of the enum oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--timeout", type=float, help="global wall-clock limit in seconds")
    p.add_argument("--events-csv", metavar="PATH", help="also write every event to a CSV file")
    p.add_argument("--bench", metavar="MANIFEST", help="run the strategy matrix over a manifest of instances")
    p.add_argument("--workers", type=int, default=1, help="parallel cells for --bench")
    return p


def config_from_args(args) -> StrategyConfig:
    shrink = args.shrink
    if args.algorithm == "linsu":
        if shrink not in (None, "none") or args.disjoint_cores or args.no_stratification:
            raise ValueError("--shrink, --disjoint-cores and --no-stratification require --algorithm one")
        shrink = "none"
    elif shrink is None:
        shrink = "progression"
    return StrategyConfig(
        algorithm=args.algorithm,
        shrink=shrink,
        disjoint_cores=args.disjoint_cores,
        stratification=not args.no_stratification,
        compile_levels=args.compile_levels,
        shrink_budget=args.shrink_budget,
        oracle=args.oracle,
        core_mode=args.core_mode,
        seed=args.seed,
        timeout=args.timeout,
    )


def read_manifest(path: str) -> tuple[list[str], dict]:
    base = os.path.dirname(os.path.abspath(path))
    paths, formats = [], {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            p = parts[0] if os.path.isabs(parts[0]) else os.path.join(base, parts[0])
            paths.append(p)
            if len(parts) > 1:
                formats[p] = parts[1]
    return paths, formats


def run_bench(args, parser) -> int:
    try:
        paths, formats = read_manifest(args.bench)
    except OSError as e:
        parser.error(f"cannot read manifest: {e}")
    kw = dict(shrink_budget=args.shrink_budget, core_mode=args.core_mode, seed=args.seed)
    rows = bench(paths, strategy_matrix(args.oracle, **kw), args.timeout, args.workers, formats)
    write_csv(rows, sys.stdout)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.bench:
        return run_bench(args, parser)
    try:
        cfg = config_from_args(args)
    except ValueError as e:
        parser.print_usage(sys.stderr)
        print(f"coreshrink: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        inst = read_instance(args.input, args.format)
    except (OSError, ParseError, UnicodeDecodeError) as e:
        print(f"coreshrink: error: {e}", file=sys.stderr)
        return EXIT_USAGE

    out = ProtocolWriter(sys.stdout)
    listeners = [out]
    csv_sink = None
    if args.events_csv:
        try:
            csv_sink = EventCsvWriter(args.events_csv)
            listeners.append(csv_sink)
        except OSError as e:
            print(f"c cannot open events csv: {e}", file=sys.stderr)
    log = EventLog(*listeners)
    out.write(f"c strategy {cfg.name}")
    try:
        res = optimize(inst, cfg, log)
    except (UnsupportedFeature, CapacityError) as e:
        print(f"coreshrink: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if csv_sink is not None:
            csv_sink.close()
    if log.failed:
        print("c warning: event reporting failed", file=sys.stderr)
    return EXIT[res.status]


if __name__ == "__main__":
    sys.exit(main())
