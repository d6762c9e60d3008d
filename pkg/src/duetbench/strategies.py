"""The three invocation strategies over a live or simulated backend.

- independent: all baseline invocations back-to-back, then all candidate
  invocations, each run alone but within the same instance context.
- rmit (randomized multiple interleaved trials): per trial a seeded coin
  decides the order, then both versions run sequentially within the trial.
- duet: both versions run in parallel per repetition, core-isolated and
  synchronized on the live backend, or given correlated noise draws on the
  simulated one.

A backend represents one "instance": either a live executor on this host or
one simulated platform instance. Seed derivation is keyed by instance id
only, never by strategy, so all strategies compared under one seed see the
same instance lottery.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .analysis import PairedSample, relative_change
from .errors import PairingError
from .executor import DuetExecutor
from .measurement import Backend, ClockMode, Measurement, Strategy, default_clock
from .simenv import (
    InstanceState,
    VariabilityModel,
    advance_time,
    draw_jitter,
    draw_noise,
    sample_instance,
    simulate_invocation,
)
from .workloads import WorkloadSpec


def _instance_streams(seed: int, instance_id: int) -> tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    """(lottery, noise, order) generators for one instance, strategy-agnostic."""
    children = np.random.SeedSequence(seed, spawn_key=(0, instance_id)).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


@dataclass(frozen=True)
class StrategyConfig:
    strategy: Strategy
    repetitions: int
    seed: int | None
    backend: Backend
    clock: ClockMode | None = None  # None = per-strategy default

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.seed is None and self.strategy is Strategy.RMIT:
            raise ValueError("rmit requires a seed for order randomization")
        if self.seed is None and self.backend is Backend.SIMULATED:
            raise ValueError("the simulated backend requires a seed")

    @property
    def effective_clock(self) -> ClockMode:
        return self.clock if self.clock is not None else default_clock(self.strategy)


@dataclass
class MeasurementSet:
    """Ordered measurements of one strategy run plus the config it ran under.

    `version_labels` is (baseline, candidate); pairing relies on it."""

    measurements: list[Measurement]
    config: StrategyConfig
    version_labels: tuple[str, str]


class InstanceBackend(Protocol):
    def run_single(
        self, spec: WorkloadSpec, *, strategy: Strategy, repetition: int, clock: ClockMode, order_position: int | None = None
    ) -> Measurement: ...

    def run_parallel_pair(
        self, spec_a: WorkloadSpec, spec_b: WorkloadSpec, *, repetition: int, clock: ClockMode
    ) -> tuple[Measurement, Measurement]: ...

    def order_coin(self) -> bool: ...


class SimulatedInstance:
    """One simulated platform instance with its own streams and clock.

    The virtual clock starts at 0 and advances one time step per sequential
    execution slot; a duet pair occupies a single slot since the two runs are
    concurrent.
    """

    def __init__(self, model: VariabilityModel, seed: int, instance_id: int = 0) -> None:
        lottery, noise, order = _instance_streams(seed, instance_id)
        self.model = model
        self.instance: InstanceState = sample_instance(model, lottery, instance_id=instance_id)
        self._noise_rng = noise
        self._order_rng = order
        self._t = 0.0

    def run_single(self, spec, *, strategy, repetition, clock, order_position=None) -> Measurement:
        m = simulate_invocation(
            self.model,
            self.instance,
            spec,
            self._t,
            self._noise_rng,
            strategy=strategy,
            repetition=repetition,
            order_position=order_position,
            clock_mode=clock,
        )
        self._t = advance_time(self._t, self.model.time_step_s)
        return m

    def run_parallel_pair(self, spec_a, spec_b, *, repetition, clock) -> tuple[Measurement, Measurement]:
        shared = draw_noise(self.model, self._noise_rng)
        pair = []
        for spec in (spec_a, spec_b):
            jitter = draw_jitter(self.model, self._noise_rng)
            pair.append(
                simulate_invocation(
                    self.model,
                    self.instance,
                    spec,
                    self._t,
                    self._noise_rng,
                    shared_draw=shared * jitter,
                    strategy=Strategy.DUET,
                    repetition=repetition,
                    clock_mode=clock,
                )
            )
        self._t = advance_time(self._t, self.model.time_step_s)
        return pair[0], pair[1]

    def order_coin(self) -> bool:
        return bool(self._order_rng.integers(0, 2) == 0)


class LiveInstance:
    """One live 'instance': a duet executor plus this process for solo runs."""

    def __init__(self, executor: DuetExecutor, instance_id: int = 0, seed: int | None = None) -> None:
        self.executor = executor
        self.instance_id = instance_id
        self._order_rng = _instance_streams(seed, instance_id)[2] if seed is not None else None

    def run_single(self, spec, *, strategy, repetition, clock, order_position=None) -> Measurement:
        return self.executor.solo_invoke(
            spec,
            clock=clock,
            strategy=strategy,
            repetition=repetition,
            instance_id=self.instance_id,
            order_position=order_position,
        )

    def run_parallel_pair(self, spec_a, spec_b, *, repetition, clock) -> tuple[Measurement, Measurement]:
        return self.executor.duet_invoke(
            spec_a, spec_b, repetition=repetition, instance_id=self.instance_id, clock=clock
        )

    def order_coin(self) -> bool:
        if self._order_rng is None:
            raise ValueError("live rmit needs a seeded instance (pass seed=...)")
        return bool(self._order_rng.integers(0, 2) == 0)


def _check(cfg: StrategyConfig, expected: Strategy, specs: tuple[WorkloadSpec, WorkloadSpec]) -> None:
    if cfg.strategy is not expected:
        raise ValueError(f"config is for {cfg.strategy.value}, not {expected.value}")
    if specs[0].version_label == specs[1].version_label:
        raise ValueError(f"the two versions need distinct labels, both are {specs[0].version_label!r}")


def run_independent(cfg: StrategyConfig, specs: tuple[WorkloadSpec, WorkloadSpec], backend: InstanceBackend) -> MeasurementSet:
    """All baseline invocations first, then all candidate invocations."""
    _check(cfg, Strategy.INDEPENDENT, specs)
    clock = cfg.effective_clock
    out: list[Measurement] = []
    for spec in specs:
        for rep in range(cfg.repetitions):
            out.append(backend.run_single(spec, strategy=Strategy.INDEPENDENT, repetition=rep, clock=clock))
    return MeasurementSet(out, cfg, (specs[0].version_label, specs[1].version_label))


def run_rmit(cfg: StrategyConfig, specs: tuple[WorkloadSpec, WorkloadSpec], backend: InstanceBackend) -> MeasurementSet:
    """Randomized interleaved trials: a fair coin orders each trial."""
    _check(cfg, Strategy.RMIT, specs)
    clock = cfg.effective_clock
    out: list[Measurement] = []
    for rep in range(cfg.repetitions):
        first, second = specs if backend.order_coin() else (specs[1], specs[0])
        out.append(backend.run_single(first, strategy=Strategy.RMIT, repetition=rep, clock=clock, order_position=0))
        out.append(backend.run_single(second, strategy=Strategy.RMIT, repetition=rep, clock=clock, order_position=1))
    return MeasurementSet(out, cfg, (specs[0].version_label, specs[1].version_label))


def run_duet(cfg: StrategyConfig, specs: tuple[WorkloadSpec, WorkloadSpec], backend: InstanceBackend) -> MeasurementSet:
    """Parallel synchronized pairs; one (baseline, candidate) pair per repetition."""
    _check(cfg, Strategy.DUET, specs)
    clock = cfg.effective_clock
    out: list[Measurement] = []
    for rep in range(cfg.repetitions):
        m_a, m_b = backend.run_parallel_pair(specs[0], specs[1], repetition=rep, clock=clock)
        out.extend((m_a, m_b))
    return MeasurementSet(out, cfg, (specs[0].version_label, specs[1].version_label))


_RUNNERS = {
    Strategy.INDEPENDENT: run_independent,
    Strategy.RMIT: run_rmit,
    Strategy.DUET: run_duet,
}


def run_strategy(cfg: StrategyConfig, specs: tuple[WorkloadSpec, WorkloadSpec], backend: InstanceBackend) -> MeasurementSet:
    return _RUNNERS[cfg.strategy](cfg, specs, backend)


def pair_measurements(
    mset: MeasurementSet,
    scheme: str = "index",
    rng: np.random.Generator | int | None = None,
) -> list[PairedSample]:
    """Match baseline and candidate measurements into per-repetition samples.

    Pairs are formed per (instance, repetition); for the independent strategy
    that equals pairing the i-th baseline invocation with the i-th candidate
    invocation. scheme="random" instead permutes the candidate assignment
    within each instance (requires an rng).
    """
    baseline_label, candidate_label = mset.version_labels
    by_instance: dict[int, dict[str, dict[int, Measurement]]] = {}
    for m in mset.measurements:
        if m.version_label not in (baseline_label, candidate_label):
            raise PairingError(f"unexpected version label {m.version_label!r}")
        slot = by_instance.setdefault(m.instance_id, {baseline_label: {}, candidate_label: {}})[m.version_label]
        if m.repetition in slot:
            raise PairingError(f"duplicate measurement for {m.version_label!r} repetition {m.repetition}")
        slot[m.repetition] = m

    samples: list[PairedSample] = []
    for instance_id in sorted(by_instance):
        base = by_instance[instance_id][baseline_label]
        cand = by_instance[instance_id][candidate_label]
        if set(base) != set(cand):
            missing = sorted(set(base).symmetric_difference(cand))
            raise PairingError(f"instance {instance_id}: unpaired repetitions {missing[:5]} (counts {len(base)} vs {len(cand)})")
        reps = sorted(base)
        cand_order = list(reps)
        if scheme == "random":
            gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
            cand_order = [reps[i] for i in gen.permutation(len(reps))]
        elif scheme != "index":
            raise ValueError(f"unknown pairing scheme {scheme!r}")
        for rep, cand_rep in zip(reps, cand_order):
            change = relative_change(base[rep].duration_ns, cand[cand_rep].duration_ns)
            samples.append(PairedSample(repetition=rep, change_pct=change))
    return samples
