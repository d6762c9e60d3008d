"""Continuous-benchmarking harness for detecting performance regressions.

Compares two versions of a deterministic workload under three invocation
strategies (independent, randomized interleaved trials, duet) and quantifies
the relative change with bootstrap percentile confidence intervals. A seeded
platform-variability simulator allows deterministic desk-scale experiments.
"""

from .analysis import (
    ConfidenceInterval,
    PairedSample,
    Verdict,
    bootstrap_ci,
    filter_cold_starts,
    percentile_interval,
    relative_change,
    sweep_sample_size,
    verdict,
)
from .errors import (
    AffinityUnsupportedError,
    BarrierTimeoutError,
    BenchmarkError,
    ConfigError,
    EmptySamplesError,
    ExecutionError,
    InsufficientCoresError,
    InsufficientSamplesError,
    InvalidRegressionError,
    InvalidWorkloadError,
    PairingError,
    SweepRangeError,
)
from .executor import BarrierTrace, CorePlan, DuetExecutor, available_cores, solo_invoke, timed_run
from .harness import (
    ExperimentConfig,
    Report,
    StrategyResult,
    compare_strategies,
    emit_report,
    reanalyze_raw,
    run_experiment,
)
from .measurement import Backend, ClockMode, Measurement, Strategy
from .simenv import (
    InstanceState,
    VariabilityModel,
    advance_time,
    drift_factor,
    sample_instance,
    simulate_invocation,
)
from .strategies import (
    LiveInstance,
    MeasurementSet,
    SimulatedInstance,
    StrategyConfig,
    pair_measurements,
    run_duet,
    run_independent,
    run_rmit,
    run_strategy,
)
from .workloads import DEFAULT_SCALES, WorkloadKind, WorkloadSpec, WorkResult, make_workload, run_workload

__version__ = "0.1.0"
