"""Command line entry point ``bermudan``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .bench import ConfigError, ExperimentConfig, ReplicateError, run_experiment, summarize
from .oracle import black_scholes_put, converged_bermudan_put

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bermudan", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--replicates", type=int)
    run.add_argument("--out", default=None, help="output directory (default: print CSV)")
    run.add_argument("--workers", type=int, default=1, help="replicates run in parallel")

    summ = sub.add_parser("summarize", help="boxplot statistics of result CSVs")
    summ.add_argument("csv", nargs="+")
    summ.add_argument("--out", default=None)

    orc = sub.add_parser("oracle", help="reference prices")
    osub = orc.add_subparsers(dest="product", required=True)
    put = osub.add_parser("put", help="binomial lattice Bermudan put")
    put.add_argument("--x0", type=float, default=100.0)
    put.add_argument("--strike", type=float, default=90.0)
    put.add_argument("--rate", type=float, default=0.05)
    put.add_argument("--vol", type=float, default=0.25)
    put.add_argument("--horizon", type=float, default=1.0)
    put.add_argument("--steps", type=int, default=12)
    put.add_argument("--lattice", type=int, default=None, help="initial lattice steps N")
    put.add_argument("--tol", type=float, default=1e-3)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * args.verbose
    logging.basicConfig(level=max(level, logging.DEBUG), format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        try:
            cfg = ExperimentConfig.from_file(args.config)
            overrides = {k: v for k, v in (("seed", args.seed), ("replicates", args.replicates))
                         if v is not None}
            if overrides:
                cfg = replace(cfg, **overrides)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            result = run_experiment(cfg, args.out, workers=args.workers)
        except ReplicateError as exc:
            print(f"numeric failure: {exc}", file=sys.stderr)
            return EXIT_NUMERIC
        if args.out is None:
            sys.stdout.write(result["csv"])
        return EXIT_OK

    if args.command == "summarize":
        try:
            text = summarize(args.csv)
        except (OSError, ValueError, KeyError) as exc:
            print(f"summarize: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    try:
        price, N, diff = converged_bermudan_put(args.x0, args.strike, args.rate, args.vol,
                                                args.horizon, args.steps,
                                                lattice_steps=args.lattice, tol=args.tol)
    except ValueError as exc:
        print(f"oracle: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    euro = black_scholes_put(args.x0, args.strike, args.rate, args.vol, args.horizon)
    print(f"price={price!r} lattice_steps={N} n_vs_2n_diff={diff:.3e} european_bs={euro!r}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
