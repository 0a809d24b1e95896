"""Command-line entry point: one subcommand per experiment, CSV artifacts out."""

from __future__ import annotations

import argparse
import io
import sys
from pathlib import Path

import numpy as np

from . import fbm
from .acceptance import run_acceptance
from .config import PROFILES, load_config
from .errors import RoughLocalVolError
from .experiments import (ArtifactWriter, constants_text, extrapolation_table,
                          harmonic_table, ldp_table, local_vol_table,
                          produce_batches, rate_function_table,
                          rescaled_smile_table, skew_ratio_table,
                          skew_term_table, smile_table)
from .params import SimulationGrid
from .rate_function import limiting_smile, minimize_rate

_EXTRAPOLATION_MATURITIES = (0.01, 0.02, 0.05)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rough-localvol",
        description="Rough Bergomi Monte Carlo and local-volatility experiments",
    )
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--cache", default=None,
                        help="batch cache directory (default <out>/batches)")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="simulate and persist path batches")
    simulate.add_argument("--dump-cov", action="store_true",
                          help="also dump each covariance matrix as CSV")
    sub.add_parser("smile", help="implied volatility smiles")
    sub.add_parser("skew-term", help="ATM implied and local skew term structure")
    sub.add_parser("skew-ratio", help="implied-to-local ATM skew ratio vs maturity")
    sub.add_parser("rescaled-smile", help="rescaled local vol smiles vs their limit")
    sub.add_parser("rate-function", help="variational rate function and limits")
    sub.add_parser("local-vol", help="kernel and ratio local vol estimates")
    sub.add_parser("harmonic", help="implied vol against the local-vol harmonic mean")
    sub.add_parser("ldp", help="rescaled tail log-probability diagnostics")
    sub.add_parser("extrapolate", help="short-maturity local vol extrapolation")
    acceptance = sub.add_parser("acceptance", help="run the acceptance gate")
    acceptance.add_argument("--override", action="append", default=[],
                            metavar="KEY=VALUE",
                            help="tamper with a criterion target (negative control)")
    return parser


def _run_command(args, config, writer: ArtifactWriter) -> int:
    cache_dir = args.cache if args.cache else Path(config.out_dir) / "batches"
    command = args.command

    if command == "acceptance":
        overrides = {}
        for item in args.override:
            key, _, value = item.partition("=")
            overrides[key] = float(value)
        results = run_acceptance(config, cache_dir, overrides or None)
        writer.write_table(
            "acceptance.csv",
            ["criterion", "passed", "measured", "target", "tolerance"],
            [(r.criterion, str(r.passed), r.measured, r.target, r.tolerance)
             for r in results])
        writer.commit()
        return 0 if all(r.passed for r in results) else 1

    if command == "rate-function":
        header, rows, _ = rate_function_table(config)
        writer.write_table("rate_function.csv", header, rows)
        writer.write_text("rate_constants.txt", constants_text(config.params))
        writer.commit()
        return 0

    batches = produce_batches(config, cache_dir)

    if command == "simulate":
        for batch in batches:
            buf = io.StringIO()
            batch.write_csv(buf)
            writer.write_text(f"batch_t{batch.maturity:g}.csv", buf.getvalue())
        if args.dump_cov:
            for t in config.maturities:
                grid = SimulationGrid(t, config.n_steps)
                cov = fbm.build_covariance(grid, config.params.hurst)
                buf = io.StringIO()
                for row in cov.matrix:
                    buf.write(",".join(format(x, ".17g") for x in row) + "\n")
                writer.write_text(f"covariance_t{t:g}.csv", buf.getvalue())
    elif command == "smile":
        header, rows = smile_table(batches, config.y_grid)
        writer.write_table("smile.csv", header, rows)
    elif command == "skew-term":
        header, rows = skew_term_table(batches)
        writer.write_table("skew_term.csv", header, rows)
    elif command == "skew-ratio":
        header, rows = skew_ratio_table(batches)
        writer.write_table("skew_ratio.csv", header, rows)
    elif command == "local-vol":
        header, rows = local_vol_table(batches, config.y_grid,
                                       config.bandwidth_delta)
        writer.write_table("local_vol.csv", header, rows)
    elif command == "rescaled-smile":
        solutions = limiting_smile(config.y_grid, config.params, config.ritz)
        header, rows = rescaled_smile_table(batches, config.y_grid, solutions)
        writer.write_table("rescaled_smile.csv", header, rows)
    elif command == "harmonic":
        header, rows = harmonic_table(batches, config.y_grid)
        writer.write_table("harmonic.csv", header, rows)
    elif command == "ldp":
        all_rows = []
        for y in config.y_grid:
            if y == 0.0:
                continue
            reference = minimize_rate(float(y), config.params, config.ritz).rate
            header, rows = ldp_table(batches, float(y), reference)
            all_rows += [(y,) + row for row in rows]
        writer.write_table("ldp.csv", ["y", "t", "value", "tail_prob",
                                       "rate_reference"], all_rows)
    elif command == "extrapolate":
        solutions = limiting_smile(config.y_grid, config.params, config.ritz)
        header, rows = extrapolation_table(
            solutions, config.params.hurst, _EXTRAPOLATION_MATURITIES,
            config.y_grid)
        writer.write_table("extrapolation.csv", header, rows)
    else:  # pragma: no cover - argparse restricts choices
        raise ValueError(f"unknown command {command}")

    writer.commit()
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config, profile=args.profile, seed=args.seed,
                             out_dir=args.out, threads=args.threads)
    except RoughLocalVolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    writer = ArtifactWriter(config.out_dir, config, args.command)
    try:
        return _run_command(args, config, writer)
    except Exception as exc:
        writer.abort()
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
