"""Command-line entry point: ``satabr {run,summarize,synth-trace,calibrate-nig}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    IoError,
    UnpairedRuns,
    config_help,
    load_config,
    read_summary_csv,
    run_matrix,
    write_outputs,
    write_synthetic_traces,
)
from .outage_model import NonConvergence, calibrate_nig, nig_cdf, read_targets_csv


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, args.out)
    summaries, logs = run_matrix(cfg)
    rows = write_outputs(cfg.output_dir, summaries, logs)
    print(f"{len(summaries)} runs written to {cfg.output_dir}")
    for r in rows:
        if r.abr == "overall":
            print(
                f"[{r.predictor}] rebuffer reduction {r.rebuffer_reduction_pct:.2f}%, "
                f"bitrate delta {r.bitrate_delta_pct:.2f}%, ltb delta {r.ltb_delta_pct:.2f}%"
            )
    return 0


def _cmd_summarize(args: argparse.Namespace) -> int:
    d = Path(args.dir)
    summaries = read_summary_csv(d / "summary.csv")
    write_outputs(d, summaries)
    sys.stdout.write((d / "report.txt").read_text())
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    cfg = load_config(args.config)
    for p in write_synthetic_traces(cfg, args.out):
        print(p)
    return 0


def _cmd_calibrate(args: argparse.Namespace) -> int:
    try:
        targets = read_targets_csv(args.targets)
    except OSError as exc:
        raise IoError(f"{args.targets}: {exc}") from None
    params, residual = calibrate_nig(targets, tol=args.tol)
    print(f"tail={params.tail!r}")
    print(f"asym={params.asym!r}")
    print(f"loc={params.loc!r}")
    print(f"scale={params.scale!r}")
    print(f"residual={residual:.3e}")
    for x, p in targets:
        print(f"  P(d < {x:g}) target {p:.4f} fitted {nig_cdf(x, params, positive=True):.4f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="satabr", description="Outage-aware live ABR simulator.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser(
        "run",
        help="run the experiment matrix of a config file",
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    run.add_argument("--config", required=True, help="INI experiment config")
    run.add_argument("--out", help="override experiment.output_dir")
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="rebuild report and CDF files from a run directory")
    summ.add_argument("--dir", required=True, help="directory containing summary.csv")
    summ.set_defaults(func=_cmd_summarize)

    syn = sub.add_parser(
        "synth-trace",
        help="write each seed's synthetic bandwidth and outage trace",
        epilog=config_help(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    syn.add_argument("--config", required=True, help="INI experiment config")
    syn.add_argument("--out", required=True, help="output directory")
    syn.set_defaults(func=_cmd_synth)

    cal = sub.add_parser("calibrate-nig", help="fit NIG duration parameters to CDF targets")
    cal.add_argument("--targets", required=True, help="CSV with columns value_s,cum_prob")
    cal.add_argument("--tol", type=float, default=1e-3, help="largest acceptable root-sum-square CDF residual")
    cal.set_defaults(func=_cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, IoError, UnpairedRuns, NonConvergence, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
