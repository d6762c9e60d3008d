from __future__ import annotations

import csv
import json
from pathlib import Path

import pytest

from duetbench.analysis import Verdict
from duetbench.errors import BenchmarkError, ConfigError
from duetbench.harness import (
    ExperimentConfig,
    compare_strategies,
    emit_report,
    instance_repetitions,
    reanalyze_raw,
    run_experiment,
)
from duetbench.measurement import Backend, Strategy
from duetbench.simenv import VariabilityModel
from duetbench.workloads import WorkloadKind

FAST = dict(repetitions=200, instances=2, resamples=1000, backend=Backend.SIMULATED)


def test_instance_repetitions_splits():
    assert instance_repetitions(1500, 4) == [375, 375, 375, 375]
    assert instance_repetitions(10, 3) == [4, 4, 2]
    assert instance_repetitions(2, 4) == [1, 1, 0, 0]
    assert sum(instance_repetitions(1501, 4)) == 1501


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(instances=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(ci_level=1.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(strategies=())
    with pytest.raises(ConfigError):
        ExperimentConfig(baseline_label="X", candidate_label="X")
    with pytest.raises(ConfigError):
        ExperimentConfig(formats=("yaml",))


def test_config_roundtrip_through_dict():
    cfg = ExperimentConfig(seed=9, repetitions=300, regression_pct=5.0, workload=WorkloadKind.MEM_SIEVE)
    clone = ExperimentConfig.from_dict(cfg.to_dict())
    assert clone.seed == 9
    assert clone.repetitions == 300
    assert clone.regression_pct == 5.0
    assert clone.workload is WorkloadKind.MEM_SIEVE
    assert clone.model == cfg.model


def test_simulated_aa_duet_passes():
    cfg = ExperimentConfig(strategies=(Strategy.DUET,), seed=101, **FAST)
    report = run_experiment(cfg)
    (result,) = report.results
    assert result.verdict is Verdict.PASS
    assert abs(result.median_change_pct) < 0.5
    assert report.overall_verdict is Verdict.PASS


def test_simulated_ab_duet_flags_regression():
    cfg = ExperimentConfig(strategies=(Strategy.DUET,), seed=101, regression_pct=5.0, threshold_pct=1.0, **FAST)
    report = run_experiment(cfg)
    (result,) = report.results
    assert result.verdict is Verdict.REGRESSION
    assert report.overall_verdict is Verdict.REGRESSION


def test_fanout_counting():
    cfg = ExperimentConfig(strategies=(Strategy.DUET,), seed=3, **FAST)
    report = run_experiment(cfg)
    (result,) = report.results
    assert result.pairs_before_filter == 200
    assert len(result.measurements) == 400
    # one cold pair per simulated instance
    assert result.pairs_after_filter == 200 - cfg.instances


def test_fanout_neutrality_total_pairs():
    counts = {}
    for instances in (1, 4):
        cfg = ExperimentConfig(strategies=(Strategy.RMIT,), seed=5, repetitions=200,
                               instances=instances, resamples=1000, backend=Backend.SIMULATED)
        report = run_experiment(cfg)
        counts[instances] = report.results[0].pairs_before_filter
    assert counts[1] == counts[4] == 200


def test_merge_is_sorted_by_instance_then_repetition():
    cfg = ExperimentConfig(strategies=(Strategy.DUET,), seed=5, **FAST)
    report = run_experiment(cfg)
    keys = [(m.instance_id, m.repetition) for m in report.results[0].measurements]
    assert keys == sorted(keys)


def test_compare_strategies_orders_and_tabulates():
    cfg = ExperimentConfig(strategies=(Strategy.DUET,), seed=11, **FAST)
    report = compare_strategies(cfg)
    table = report.strategy_table()
    assert [row[0] for row in table] == ["independent", "rmit", "duet"]
    widths = {row[0]: row[1] for row in table}
    assert widths["duet"] < widths["rmit"] < widths["independent"]


def test_single_strategy_single_row_table():
    cfg = ExperimentConfig(strategies=(Strategy.RMIT,), seed=2, **FAST)
    assert len(run_experiment(cfg).strategy_table()) == 1


def test_noise_free_model_gives_zero_widths():
    quiet = VariabilityModel(
        instance_quality_cv=0.0, temporal_sigma=0.0, cold_penalty_ms=0.0,
        drift_amplitude=0.0, duet_jitter_cv=0.0,
    )
    cfg = ExperimentConfig(seed=8, model=quiet, **FAST)
    report = run_experiment(cfg)
    assert all(r.ci.width_pp == 0.0 for r in report.results)
    assert all(r.median_change_pct == 0.0 for r in report.results)


def test_end_to_end_determinism_byte_identical_summary(tmp_path):
    from duetbench.harness import summary_dict

    cfg = ExperimentConfig(seed=77, output_dir=tmp_path, **FAST)
    blobs = []
    for _ in range(2):
        summary = summary_dict(run_experiment(cfg))
        summary.pop("run")
        blobs.append(json.dumps(summary, sort_keys=True).encode())
    assert blobs[0] == blobs[1]


def test_emit_report_files_and_consistency(tmp_path):
    cfg = ExperimentConfig(strategies=(Strategy.DUET,), seed=4, output_dir=tmp_path, **FAST)
    report = run_experiment(cfg)
    written = emit_report(report, tmp_path, ("json", "csv"))

    with open(written["raw_csv"], newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == list(
        ("strategy", "instance_id", "repetition", "version", "duration_ns", "clock_mode", "cold", "order_position")
    )
    assert len(rows) - 1 == 2 * 200  # two measurements per pair

    summary = json.loads(Path(written["summary_json"]).read_text())
    with open(written["summary_csv"], newline="") as fh:
        (csv_row,) = list(csv.DictReader(fh))
    block = summary["strategies"]["duet"]
    assert float(csv_row["median_change_pct"]) == block["median_change_pct"]
    assert float(csv_row["width_pp"]) == block["ci"]["width_pp"]
    assert csv_row["verdict"] == block["verdict"]


def test_emit_empty_report_rejected(tmp_path):
    from duetbench.harness import Report

    empty = Report(results=[], config={}, seed=0, started_at="", finished_at="")
    with pytest.raises(BenchmarkError):
        emit_report(empty, tmp_path)


def test_sweep_csv_emission(tmp_path):
    cfg = ExperimentConfig(
        strategies=(Strategy.DUET,), seed=6, repetitions=161, instances=1, resamples=1000,
        backend=Backend.SIMULATED, run_sweep=True, sweep_start=50, sweep_stop=160, sweep_step=10,
        output_dir=tmp_path,
    )
    report = run_experiment(cfg)
    written = emit_report(report, tmp_path)
    with open(written["sweep_csv"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12
    assert rows[0]["strategy"] == "duet" and rows[0]["n"] == "50"


def test_reanalysis_reproduces_cis_exactly(tmp_path):
    cfg = ExperimentConfig(seed=31, output_dir=tmp_path, **FAST)
    report = run_experiment(cfg)
    written = emit_report(report, tmp_path)
    again = reanalyze_raw(
        written["raw_csv"], seed=31, ci_level=cfg.ci_level, resamples=cfg.resamples,
        threshold_pct=cfg.threshold_pct, min_samples=cfg.min_samples,
    )
    orig = {r.strategy: r for r in report.results}
    for result in again.results:
        assert result.ci == orig[result.strategy].ci
        assert result.median_change_pct == orig[result.strategy].median_change_pct
        assert result.verdict == orig[result.strategy].verdict


def test_config_from_file_with_overrides(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "strategies": ["duet"],
        "backend": "simulated",
        "repetitions": 120,
        "seed": 5,
        "workload": {"kind": "mem_sieve", "scale": 5000},
        "model": {"temporal_sigma": 0.02},
    }))
    cfg = ExperimentConfig.from_file(path, repetitions=150)
    assert cfg.strategies == (Strategy.DUET,)
    assert cfg.repetitions == 150  # override wins
    assert cfg.workload is WorkloadKind.MEM_SIEVE
    assert cfg.scale == 5000
    assert cfg.model.temporal_sigma == 0.02
