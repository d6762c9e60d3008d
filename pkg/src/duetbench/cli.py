"""Command line interface.

Subcommands: run, compare, sweep, analyze. Exit codes are the pipeline
contract: 0 = pass, 1 = regression detected, 2 = error, 3 = inconclusive
(compare and sweep are reporting commands and exit 0 unless an error occurs).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .analysis import Verdict
from .errors import BenchmarkError
from .harness import (
    ExperimentConfig,
    Report,
    compare_strategies,
    emit_report,
    reanalyze_raw,
    run_experiment,
)
from .measurement import Backend, ClockMode, Strategy
from .workloads import WorkloadKind

EXIT_PASS = 0
EXIT_REGRESSION = 1
EXIT_ERROR = 2
EXIT_INCONCLUSIVE = 3

_VERDICT_EXIT = {Verdict.PASS: EXIT_PASS, Verdict.REGRESSION: EXIT_REGRESSION, Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE}

_MODEL_FLAGS = (
    ("quality-cv", "instance_quality_cv"),
    ("temporal-sigma", "temporal_sigma"),
    ("cold-penalty-ms", "cold_penalty_ms"),
    ("base-cost-ns", "base_cost_ns_per_unit"),
    ("drift-period-s", "drift_period_s"),
    ("drift-amplitude", "drift_amplitude"),
    ("duet-jitter-cv", "duet_jitter_cv"),
    ("time-step-s", "time_step_s"),
)


def _add_experiment_flags(p: argparse.ArgumentParser, *, with_strategies: bool) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    if with_strategies:
        p.add_argument("--strategy", action="append", choices=[s.value for s in Strategy],
                       help="strategy to run (repeatable; default: all three)")
    p.add_argument("--backend", choices=[b.value for b in Backend])
    p.add_argument("--repetitions", type=int)
    p.add_argument("--instances", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workload", choices=[k.value for k in WorkloadKind])
    p.add_argument("--scale", type=int)
    p.add_argument("--regression-pct", type=float)
    p.add_argument("--baseline-label")
    p.add_argument("--candidate-label")
    p.add_argument("--ci-level", type=float)
    p.add_argument("--resamples", type=int)
    p.add_argument("--threshold-pct", type=float)
    p.add_argument("--min-samples", type=int)
    p.add_argument("--sweep", action="store_true", default=None, help="also compute the sample-size sweep")
    p.add_argument("--sweep-start", type=int)
    p.add_argument("--sweep-stop", type=int)
    p.add_argument("--sweep-step", type=int)
    p.add_argument("--clock", choices=[c.value for c in ClockMode], help="force one clock for every strategy")
    p.add_argument("--pairing", choices=["index", "random"])
    p.add_argument("--no-pin", action="store_true", default=None, help="run live workers without core pinning")
    p.add_argument("--cores", type=int, nargs=2, metavar=("CORE_A", "CORE_B"))
    for flag, _ in _MODEL_FLAGS:
        p.add_argument(f"--{flag}", type=float)
    p.add_argument("--out", type=Path, help="output directory (default: results)")
    p.add_argument("--format", action="append", choices=["json", "csv"], help="summary format (repeatable)")


def _config_from_args(args: argparse.Namespace, *, force_sweep: bool = False) -> ExperimentConfig:
    overrides: dict = {}
    if getattr(args, "strategy", None):
        overrides["strategies"] = tuple(Strategy(s) for s in args.strategy)
    if args.backend is not None:
        overrides["backend"] = Backend(args.backend)
    for flag, key in (
        ("repetitions", "repetitions"), ("instances", "instances"), ("seed", "seed"),
        ("scale", "scale"), ("regression_pct", "regression_pct"),
        ("baseline_label", "baseline_label"), ("candidate_label", "candidate_label"),
        ("ci_level", "ci_level"), ("resamples", "resamples"), ("threshold_pct", "threshold_pct"),
        ("min_samples", "min_samples"), ("sweep_start", "sweep_start"),
        ("sweep_stop", "sweep_stop"), ("sweep_step", "sweep_step"), ("pairing", "pairing"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.workload is not None:
        overrides["workload"] = WorkloadKind(args.workload)
    if args.sweep or force_sweep:
        overrides["run_sweep"] = True
    if args.clock is not None:
        overrides["clock"] = ClockMode(args.clock)
    if args.no_pin:
        overrides["pinning"] = False
    if args.cores is not None:
        overrides["core_a"], overrides["core_b"] = args.cores
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.format:
        overrides["formats"] = tuple(dict.fromkeys(args.format))

    model_overrides = {key: getattr(args, flag.replace("-", "_")) for flag, key in _MODEL_FLAGS
                       if getattr(args, flag.replace("-", "_")) is not None}

    if args.config is not None:
        cfg = ExperimentConfig.from_file(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**overrides)
    if model_overrides:
        cfg = dataclasses.replace(cfg, model=dataclasses.replace(cfg.model, **model_overrides))
    return cfg


def _print_table(report: Report) -> None:
    print(f"{'strategy':<14} {'width_pp':>12} {'median_change_pct':>20} {'verdict':>14}")
    for result in report.results:
        print(f"{result.strategy.value:<14} {result.ci.width_pp:>12.4f} {result.median_change_pct:>20.4f} {result.verdict.value:>14}")


def _emit_and_summarize(report: Report, cfg: ExperimentConfig) -> None:
    written = emit_report(report, cfg.output_dir, cfg.formats)
    _print_table(report)
    for name, path in sorted(written.items()):
        print(f"wrote {name}: {path}")


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    report = run_experiment(cfg)
    _emit_and_summarize(report, cfg)
    print(f"overall verdict: {report.overall_verdict.value}")
    return _VERDICT_EXIT[report.overall_verdict]


def _cmd_compare(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args)
    report = compare_strategies(cfg)
    _emit_and_summarize(report, cfg)
    return EXIT_PASS


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _config_from_args(args, force_sweep=True)
    report = run_experiment(cfg)
    _emit_and_summarize(report, cfg)
    return EXIT_PASS


def _cmd_analyze(args: argparse.Namespace) -> int:
    report = reanalyze_raw(
        args.raw_csv,
        seed=args.seed if args.seed is not None else 42,
        ci_level=args.ci_level if args.ci_level is not None else 0.99,
        resamples=args.resamples if args.resamples is not None else 10_000,
        threshold_pct=args.threshold_pct if args.threshold_pct is not None else 1.0,
        min_samples=args.min_samples if args.min_samples is not None else 50,
        baseline_label=args.baseline_label or "A",
        candidate_label=args.candidate_label or "B",
        pairing=args.pairing or "index",
    )
    if args.out is not None:
        emit_report(report, args.out, tuple(dict.fromkeys(args.format)) if args.format else ("json", "csv"))
    _print_table(report)
    print(f"overall verdict: {report.overall_verdict.value}")
    return _VERDICT_EXIT[report.overall_verdict]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="duetbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured strategies and gate on the verdict")
    _add_experiment_flags(p_run, with_strategies=True)
    p_run.set_defaults(fn=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run all three strategies and tabulate CI widths")
    _add_experiment_flags(p_cmp, with_strategies=False)
    p_cmp.set_defaults(fn=_cmd_compare, strategy=None)

    p_sweep = sub.add_parser("sweep", help="run with the sample-size sweep enabled")
    _add_experiment_flags(p_sweep, with_strategies=True)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_an = sub.add_parser("analyze", help="recompute CIs and verdicts from an archived raw.csv")
    p_an.add_argument("raw_csv", type=Path)
    p_an.add_argument("--seed", type=int)
    p_an.add_argument("--ci-level", type=float)
    p_an.add_argument("--resamples", type=int)
    p_an.add_argument("--threshold-pct", type=float)
    p_an.add_argument("--min-samples", type=int)
    p_an.add_argument("--baseline-label")
    p_an.add_argument("--candidate-label")
    p_an.add_argument("--pairing", choices=["index", "random"])
    p_an.add_argument("--out", type=Path)
    p_an.add_argument("--format", action="append", choices=["json", "csv"])
    p_an.set_defaults(fn=_cmd_analyze)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (BenchmarkError, OSError, ValueError) as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return EXIT_ERROR


def main_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
