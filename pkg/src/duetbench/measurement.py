"""Shared measurement record and the enums that tag it.

A `Measurement` is one timed invocation of one workload version. Everything
downstream (pairing, cold filtering, bootstrap analysis, CSV export) operates
on lists of these records, regardless of whether they came from the live
executor or the simulated platform.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .workloads import WorkResult


class Strategy(str, Enum):
    """How the two versions are invoked relative to each other."""

    INDEPENDENT = "independent"
    RMIT = "rmit"
    DUET = "duet"


class ClockMode(str, Enum):
    """What the duration of an invocation is measured with.

    CPU_TIME is per-thread CPU time; WALL_CLOCK is the difference of
    timestamps taken before and after the call. Default policy: duet
    invocations use CPU_TIME, the sequential strategies use WALL_CLOCK.
    A config override can force either clock everywhere.
    """

    CPU_TIME = "cpu_time"
    WALL_CLOCK = "wall_clock"


class Backend(str, Enum):
    """Where invocations actually run."""

    LIVE = "live"
    SIMULATED = "simulated"


def default_clock(strategy: Strategy) -> ClockMode:
    return ClockMode.CPU_TIME if strategy is Strategy.DUET else ClockMode.WALL_CLOCK


@dataclass(frozen=True)
class Measurement:
    """One timed invocation.

    `order_position` is only set for RMIT trials (0 = ran first in its trial).
    `result` carries the workload output for determinism checks; the simulated
    backend leaves it None since it models durations, not actual work.
    """

    duration_ns: int
    clock_mode: ClockMode
    version_label: str
    strategy: Strategy
    instance_id: int
    repetition: int
    cold: bool
    order_position: int | None = None
    result: WorkResult | None = None

    def __post_init__(self) -> None:
        if self.duration_ns <= 0:
            raise ValueError(f"completed invocation must have duration_ns > 0, got {self.duration_ns}")
        if self.repetition < 0:
            raise ValueError(f"repetition must be >= 0, got {self.repetition}")
        if self.order_position not in (None, 0, 1):
            raise ValueError(f"order_position must be None, 0 or 1, got {self.order_position}")
