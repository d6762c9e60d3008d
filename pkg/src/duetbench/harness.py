"""Experiment orchestration: config, instance fan-out, reports, file output.

An experiment runs one workload comparison (baseline vs candidate) under one
or more strategies, fanning each strategy out over `instances` parallel
"instances" (fresh simulated instances, or fresh executors in live mode),
merging the measurements, filtering cold starts, pairing, and bootstrapping
a confidence interval of the median change.

Everything that ends up in the summary is regenerable from the raw
measurement CSV plus the seed; analysis RNG streams are derived from the
seed and the strategy alone, never from run order.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from .analysis import (
    ConfidenceInterval,
    PairedSample,
    Verdict,
    bootstrap_ci,
    filter_cold_starts,
    sweep_sample_size,
    verdict,
)
from .errors import BenchmarkError, ConfigError
from .executor import CorePlan, DuetExecutor
from .measurement import Backend, ClockMode, Measurement, Strategy
from .simenv import VariabilityModel
from .strategies import (
    LiveInstance,
    MeasurementSet,
    SimulatedInstance,
    StrategyConfig,
    pair_measurements,
    run_strategy,
)
from .workloads import DEFAULT_SCALES, WorkloadKind, WorkloadSpec, make_workload

ALL_STRATEGIES = (Strategy.INDEPENDENT, Strategy.RMIT, Strategy.DUET)

# Fixed per-strategy codes for analysis stream derivation; independent of the
# order strategies appear in a config, so re-analysis reproduces the same CI.
_STRATEGY_CODE = {Strategy.INDEPENDENT: 0, Strategy.RMIT: 1, Strategy.DUET: 2}

RAW_CSV_COLUMNS = ("strategy", "instance_id", "repetition", "version", "duration_ns", "clock_mode", "cold", "order_position")


def analysis_rng(seed: int, strategy: Strategy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1, _STRATEGY_CODE[strategy])))


def sweep_rng(seed: int, strategy: Strategy) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2, _STRATEGY_CODE[strategy])))


@dataclass(frozen=True)
class ExperimentConfig:
    strategies: tuple[Strategy, ...] = ALL_STRATEGIES
    backend: Backend = Backend.SIMULATED
    repetitions: int = 1500
    instances: int = 4
    seed: int = 42
    workload: WorkloadKind = WorkloadKind.CPU_MUTATION
    scale: int | None = None  # None = per-kind default
    regression_pct: float = 0.0
    baseline_label: str = "A"
    candidate_label: str = "B"
    ci_level: float = 0.99
    resamples: int = 10_000
    threshold_pct: float = 1.0
    min_samples: int = 50
    run_sweep: bool = False
    sweep_start: int = 50
    sweep_stop: int = 1500
    sweep_step: int = 5
    clock: ClockMode | None = None
    pairing: str = "index"
    pinning: bool = True
    core_a: int = 0
    core_b: int = 1
    model: VariabilityModel = field(default_factory=VariabilityModel)
    output_dir: Path = Path("results")
    formats: tuple[str, ...] = ("json", "csv")

    def __post_init__(self) -> None:
        if self.instances < 1:
            raise ConfigError(f"instances must be >= 1, got {self.instances}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if not 0.0 < self.ci_level < 1.0:
            raise ConfigError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        if self.baseline_label == self.candidate_label:
            raise ConfigError("baseline and candidate labels must differ")
        unknown = set(self.formats) - {"json", "csv"}
        if unknown:
            raise ConfigError(f"unknown summary formats: {sorted(unknown)}")

    @property
    def effective_scale_base(self) -> int:
        return self.scale if self.scale is not None else DEFAULT_SCALES[self.workload]

    def specs(self) -> tuple[WorkloadSpec, WorkloadSpec]:
        base = self.effective_scale_base
        return (
            make_workload(self.workload, base, self.baseline_label, 0.0),
            make_workload(self.workload, base, self.candidate_label, self.regression_pct),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "strategies": [s.value for s in self.strategies],
            "backend": self.backend.value,
            "repetitions": self.repetitions,
            "instances": self.instances,
            "seed": self.seed,
            "workload": {"kind": self.workload.value, "scale": self.effective_scale_base},
            "regression_pct": self.regression_pct,
            "labels": [self.baseline_label, self.candidate_label],
            "ci_level": self.ci_level,
            "resamples": self.resamples,
            "threshold_pct": self.threshold_pct,
            "min_samples": self.min_samples,
            "sweep": {"enabled": self.run_sweep, "start": self.sweep_start, "stop": self.sweep_stop, "step": self.sweep_step},
            "clock": self.clock.value if self.clock is not None else None,
            "pairing": self.pairing,
            "pinning": self.pinning,
            "cores": [self.core_a, self.core_b],
            "model": {
                "instance_quality_cv": self.model.instance_quality_cv,
                "temporal_sigma": self.model.temporal_sigma,
                "cold_penalty_ms": self.model.cold_penalty_ms,
                "base_cost_ns_per_unit": self.model.base_cost_ns_per_unit,
                "drift_period_s": self.model.drift_period_s,
                "drift_amplitude": self.model.drift_amplitude,
                "duet_jitter_cv": self.model.duet_jitter_cv,
                "time_step_s": self.model.time_step_s,
            },
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any], **overrides: Any) -> "ExperimentConfig":
        kwargs: dict[str, Any] = {}
        if "strategies" in raw:
            kwargs["strategies"] = tuple(Strategy(s) for s in raw["strategies"])
        if "backend" in raw:
            kwargs["backend"] = Backend(raw["backend"])
        for key in ("repetitions", "instances", "seed", "regression_pct", "ci_level", "resamples",
                    "threshold_pct", "min_samples", "pairing", "pinning"):
            if key in raw:
                kwargs[key] = raw[key]
        workload = raw.get("workload", {})
        if "kind" in workload:
            kwargs["workload"] = WorkloadKind(workload["kind"])
        if workload.get("scale") is not None:
            kwargs["scale"] = workload["scale"]
        if "labels" in raw:
            kwargs["baseline_label"], kwargs["candidate_label"] = raw["labels"]
        sweep = raw.get("sweep", {})
        if "enabled" in sweep:
            kwargs["run_sweep"] = sweep["enabled"]
        for src, dst in (("start", "sweep_start"), ("stop", "sweep_stop"), ("step", "sweep_step")):
            if src in sweep:
                kwargs[dst] = sweep[src]
        if raw.get("clock") is not None:
            kwargs["clock"] = ClockMode(raw["clock"])
        if "cores" in raw:
            kwargs["core_a"], kwargs["core_b"] = raw["cores"]
        if "model" in raw:
            kwargs["model"] = VariabilityModel(**raw["model"])
        if "output_dir" in raw:
            kwargs["output_dir"] = Path(raw["output_dir"])
        if "formats" in raw:
            kwargs["formats"] = tuple(raw["formats"])
        kwargs.update(overrides)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: Path | str, **overrides: Any) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), **overrides)


def instance_repetitions(total: int, instances: int) -> list[int]:
    """ceil(total/instances) per instance, truncated so the sum equals total."""
    per = math.ceil(total / instances)
    out: list[int] = []
    remaining = total
    for _ in range(instances):
        take = min(per, remaining)
        out.append(take)
        remaining -= take
    return out


@dataclass
class StrategyResult:
    strategy: Strategy
    measurements: list[Measurement]
    pairs_before_filter: int
    pairs_after_filter: int
    median_change_pct: float
    ci: ConfidenceInterval
    verdict: Verdict
    samples: list[PairedSample]
    sweep: list[tuple[int, float]] | None = None


@dataclass
class Report:
    results: list[StrategyResult]
    config: dict[str, Any]
    seed: int
    started_at: str
    finished_at: str

    @property
    def overall_verdict(self) -> Verdict:
        verdicts = {r.verdict for r in self.results}
        if Verdict.REGRESSION in verdicts:
            return Verdict.REGRESSION
        if Verdict.INCONCLUSIVE in verdicts:
            return Verdict.INCONCLUSIVE
        return Verdict.PASS

    def strategy_table(self) -> list[tuple[str, float, float]]:
        """(strategy, ci_width_pp, median_change_pct) rows in run order."""
        return [(r.strategy.value, r.ci.width_pp, r.median_change_pct) for r in self.results]


def _run_one_strategy(cfg: ExperimentConfig, strategy: Strategy, specs) -> MeasurementSet:
    merged: list[Measurement] = []
    for instance_id, reps in enumerate(instance_repetitions(cfg.repetitions, cfg.instances)):
        if reps == 0:
            continue
        scfg = StrategyConfig(strategy=strategy, repetitions=reps, seed=cfg.seed, backend=cfg.backend, clock=cfg.clock)
        if cfg.backend is Backend.SIMULATED:
            backend = SimulatedInstance(cfg.model, cfg.seed, instance_id=instance_id)
            mset = run_strategy(scfg, specs, backend)
        else:
            with DuetExecutor(CorePlan(cfg.core_a, cfg.core_b), pinning=cfg.pinning) as executor:
                backend = LiveInstance(executor, instance_id=instance_id, seed=cfg.seed)
                mset = run_strategy(scfg, specs, backend)
        merged.extend(mset.measurements)
    merged.sort(key=lambda m: (m.instance_id, m.repetition))  # stable: in-repetition order kept
    full_cfg = StrategyConfig(strategy=strategy, repetitions=cfg.repetitions, seed=cfg.seed, backend=cfg.backend, clock=cfg.clock)
    return MeasurementSet(merged, full_cfg, (cfg.baseline_label, cfg.candidate_label))


def analyze_measurement_set(
    mset: MeasurementSet,
    *,
    seed: int,
    ci_level: float,
    resamples: int,
    threshold_pct: float,
    min_samples: int,
    pairing: str = "index",
    run_sweep: bool = False,
    sweep_start: int = 50,
    sweep_stop: int = 1500,
    sweep_step: int = 5,
) -> StrategyResult:
    """Cold-filter, pair, bootstrap and gate one strategy's measurements."""
    strategy = mset.config.strategy
    pairing_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, _STRATEGY_CODE[strategy])))
    pairs_before = pair_measurements(mset, scheme=pairing, rng=pairing_rng)
    filtered = filter_cold_starts(mset)
    pairing_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3, _STRATEGY_CODE[strategy])))
    samples = pair_measurements(filtered, scheme=pairing, rng=pairing_rng)
    ci = bootstrap_ci(samples, ci_level, resamples, analysis_rng(seed, strategy), min_samples=min_samples)
    median = float(np.median([s.change_pct for s in samples]))
    sweep = None
    if run_sweep:
        sweep = sweep_sample_size(
            samples, sweep_start, sweep_stop, sweep_step, ci_level, resamples,
            sweep_rng(seed, strategy), min_samples=min_samples,
        )
    return StrategyResult(
        strategy=strategy,
        measurements=mset.measurements,
        pairs_before_filter=len(pairs_before),
        pairs_after_filter=len(samples),
        median_change_pct=median,
        ci=ci,
        verdict=verdict(ci, threshold_pct),
        samples=samples,
        sweep=sweep,
    )


def run_experiment(cfg: ExperimentConfig) -> Report:
    """Run every configured strategy and assemble the report."""
    started = datetime.now(timezone.utc).isoformat()
    specs = cfg.specs()
    results = []
    for strategy in cfg.strategies:
        mset = _run_one_strategy(cfg, strategy, specs)
        results.append(
            analyze_measurement_set(
                mset,
                seed=cfg.seed,
                ci_level=cfg.ci_level,
                resamples=cfg.resamples,
                threshold_pct=cfg.threshold_pct,
                min_samples=cfg.min_samples,
                pairing=cfg.pairing,
                run_sweep=cfg.run_sweep,
                sweep_start=cfg.sweep_start,
                sweep_stop=cfg.sweep_stop,
                sweep_step=cfg.sweep_step,
            )
        )
    finished = datetime.now(timezone.utc).isoformat()
    return Report(results=results, config=cfg.to_dict(), seed=cfg.seed, started_at=started, finished_at=finished)


def compare_strategies(cfg: ExperimentConfig) -> Report:
    """Run all three strategies on identical workload seeds for comparison."""
    return run_experiment(replace(cfg, strategies=ALL_STRATEGIES))


def summary_dict(report: Report) -> dict[str, Any]:
    strategies = {}
    for r in report.results:
        strategies[r.strategy.value] = {
            "median_change_pct": r.median_change_pct,
            "ci": {
                "lower_pct": r.ci.lower_pct,
                "upper_pct": r.ci.upper_pct,
                "level": r.ci.level,
                "width_pp": r.ci.width_pp,
            },
            "verdict": r.verdict.value,
            "measurements": len(r.measurements),
            "pairs_before_filter": r.pairs_before_filter,
            "pairs_after_filter": r.pairs_after_filter,
            "cold_removed": r.pairs_before_filter - r.pairs_after_filter,
            "sweep_points": len(r.sweep) if r.sweep is not None else None,
        }
    return {
        "schema": "duetbench-summary/1",
        "config": report.config,
        "seed": report.seed,
        "run": {"started_at": report.started_at, "finished_at": report.finished_at},
        "strategies": strategies,
        "overall_verdict": report.overall_verdict.value,
    }


def emit_report(report: Report, out_dir: Path | str, formats: tuple[str, ...] = ("json", "csv")) -> dict[str, Path]:
    """Write raw measurements, summary file(s) and the sweep series.

    Always writes raw.csv; writes summary.json and/or summary.csv per
    `formats`; writes sweep.csv when any strategy carries a sweep series.
    Returns the paths written, keyed by artifact name.
    """
    if not report.results:
        raise BenchmarkError("cannot emit an empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    raw_path = out / "raw.csv"
    with open(raw_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RAW_CSV_COLUMNS)
        for r in report.results:
            for m in r.measurements:
                writer.writerow(
                    [
                        m.strategy.value,
                        m.instance_id,
                        m.repetition,
                        m.version_label,
                        m.duration_ns,
                        m.clock_mode.value,
                        "true" if m.cold else "false",
                        "" if m.order_position is None else m.order_position,
                    ]
                )
    written["raw_csv"] = raw_path

    summary = summary_dict(report)
    if "json" in formats:
        path = out / "summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written["summary_json"] = path
    if "csv" in formats:
        path = out / "summary.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["strategy", "median_change_pct", "ci_lower_pct", "ci_upper_pct", "ci_level",
                 "width_pp", "verdict", "measurements", "pairs_before_filter", "pairs_after_filter"]
            )
            for r in report.results:
                s = summary["strategies"][r.strategy.value]
                writer.writerow(
                    [r.strategy.value, s["median_change_pct"], s["ci"]["lower_pct"], s["ci"]["upper_pct"],
                     s["ci"]["level"], s["ci"]["width_pp"], s["verdict"], s["measurements"],
                     s["pairs_before_filter"], s["pairs_after_filter"]]
                )
        written["summary_csv"] = path

    if any(r.sweep is not None for r in report.results):
        path = out / "sweep.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["strategy", "n", "width_pp"])
            for r in report.results:
                for n, width in r.sweep or []:
                    writer.writerow([r.strategy.value, n, width])
        written["sweep_csv"] = path
    return written


def load_raw_csv(path: Path | str) -> dict[Strategy, list[Measurement]]:
    """Read a raw.csv back into per-strategy measurement lists."""
    grouped: dict[Strategy, list[Measurement]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(RAW_CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise BenchmarkError(f"raw csv is missing columns: {sorted(missing)}")
        for row in reader:
            strategy = Strategy(row["strategy"])
            grouped.setdefault(strategy, []).append(
                Measurement(
                    duration_ns=int(row["duration_ns"]),
                    clock_mode=ClockMode(row["clock_mode"]),
                    version_label=row["version"],
                    strategy=strategy,
                    instance_id=int(row["instance_id"]),
                    repetition=int(row["repetition"]),
                    cold=row["cold"] == "true",
                    order_position=None if row["order_position"] == "" else int(row["order_position"]),
                )
            )
    if not grouped:
        raise BenchmarkError(f"no measurements found in {path}")
    return grouped


def reanalyze_raw(
    path: Path | str,
    *,
    seed: int,
    ci_level: float = 0.99,
    resamples: int = 10_000,
    threshold_pct: float = 1.0,
    min_samples: int = 50,
    baseline_label: str = "A",
    candidate_label: str = "B",
    pairing: str = "index",
) -> Report:
    """Recompute every strategy's CI and verdict from archived measurements."""
    started = datetime.now(timezone.utc).isoformat()
    grouped = load_raw_csv(path)
    results = []
    for strategy in sorted(grouped, key=lambda s: _STRATEGY_CODE[s]):
        measurements = grouped[strategy]
        reps = len({(m.instance_id, m.repetition) for m in measurements})
        scfg = StrategyConfig(strategy=strategy, repetitions=reps, seed=seed, backend=Backend.SIMULATED)
        mset = MeasurementSet(measurements, scfg, (baseline_label, candidate_label))
        results.append(
            analyze_measurement_set(
                mset, seed=seed, ci_level=ci_level, resamples=resamples,
                threshold_pct=threshold_pct, min_samples=min_samples, pairing=pairing,
            )
        )
    finished = datetime.now(timezone.utc).isoformat()
    config = {"reanalyzed_from": str(path), "seed": seed, "ci_level": ci_level, "resamples": resamples,
              "threshold_pct": threshold_pct, "min_samples": min_samples,
              "labels": [baseline_label, candidate_label], "pairing": pairing}
    return Report(results=results, config=config, seed=seed, started_at=started, finished_at=finished)
