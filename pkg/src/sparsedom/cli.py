"""Command-line entry point.

Subcommands run one experiment each and write report.json plus rows.csv
into the output directory.  Exit codes: 0 when every configured acceptance
flag passes, 1 when the run completed but a flag failed, 2 for config
errors (the message names the offending key), 3 for numerical failures
(the message carries the trial digest).
"""
from __future__ import annotations

import argparse
import sys

from .harness import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    Report,
    RUNNERS,
    TrialError,
    config_from_mapping,
    load_config_file,
    write_report,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsedom",
        description="Numerical verification harness for dyadic sparse domination of maximal truncated singular integrals.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="|".join(EXPERIMENTS))
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", metavar="PATH", help="flat key = value config file")
        p.add_argument("--out", metavar="DIR", help="directory for report.json and rows.csv")
        p.add_argument("--seed", type=int, metavar="U64", help="override the seed")
        p.add_argument("--trials", type=int, metavar="N", help="override the trial count")
        p.add_argument("--resolution", type=int, metavar="J", help="override domain.J")
        p.add_argument("--quiet", action="store_true", help="suppress console output")
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig(kind=args.experiment)
    if args.config:
        cfg = load_config_file(args.config, cfg)
        if cfg.kind and cfg.kind != args.experiment:
            raise ConfigError("kind", f"config says {cfg.kind!r} but subcommand is {args.experiment!r}")
    overrides: dict[str, object] = {"kind": args.experiment}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.resolution is not None:
        overrides["domain.J"] = args.resolution
    if args.out is not None:
        overrides["out"] = args.out
    return config_from_mapping(overrides, cfg)


def _print_summary(report: Report) -> None:
    summary = report.summary
    print(f"experiment: {report.experiment}  (config {report.config_digest})")
    for key in ("space", "phi", "p"):
        if key in summary:
            print(f"  {key}: {summary[key]}")
    if "empirical_C" in summary:
        print(f"  empirical constant: {summary['empirical_C']:.6g}")
    if "sweep_spread" in summary:
        print(f"  sweep spread: {summary['sweep_spread']:.4g}")
    if "stability" in summary:
        st = summary["stability"]
        print(f"  stability J->J+1: {st['value']:.6g} -> {st['value_next_level']:.6g} ({st['rel_change']:.2%})")
    print(f"  rows: {len(report.rows)}")
    print("PASS" if report.ok else "FAIL")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        report = RUNNERS[args.experiment](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrialError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    if cfg.out:
        json_path, csv_path = write_report(report, cfg.out)
        if not args.quiet:
            print(f"wrote {json_path} and {csv_path}")
    if not args.quiet:
        _print_summary(report)
    return 0 if report.ok else 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
