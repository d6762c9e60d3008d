"""Statistical analysis: relative changes, percentile bootstrap CIs, verdicts.

The relative performance change of a candidate B against a baseline A is

    change_pct = (t_b - t_a) / t_a * 100

i.e. positive values mean B is slower. The confidence interval of the median
change is a percentile bootstrap: resample the paired changes with
replacement, take the median of every resample, then trim equal tails of the
resulting medians (sort ascending, drop floor(n*(1-level)/2) values from each
end; the remaining extremes are the bounds). This makes no distributional
assumptions about the measurements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import EmptySamplesError, InsufficientSamplesError, SweepRangeError

if TYPE_CHECKING:
    from .strategies import MeasurementSet

DEFAULT_LEVEL = 0.99
DEFAULT_RESAMPLES = 10_000
MIN_SAMPLE_SIZE = 50

# Bootstrapping below ~50 samples is known to underestimate interval size,
# so bootstrap_ci refuses rather than silently returning a too-narrow CI.

_RESAMPLE_CHUNK = 2_000


@dataclass(frozen=True)
class PairedSample:
    """Per-repetition relative change (percent) between the two versions."""

    repetition: int
    change_pct: float

    def __post_init__(self) -> None:
        if not math.isfinite(self.change_pct):
            raise ValueError(f"change_pct must be finite, got {self.change_pct}")


@dataclass(frozen=True)
class ConfidenceInterval:
    lower_pct: float
    upper_pct: float
    level: float
    width_pp: float = field(init=False)

    def __post_init__(self) -> None:
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"level must lie in (0, 1), got {self.level}")
        if self.lower_pct > self.upper_pct:
            raise ValueError(f"lower bound {self.lower_pct} exceeds upper bound {self.upper_pct}")
        object.__setattr__(self, "width_pp", self.upper_pct - self.lower_pct)


class Verdict(str, Enum):
    PASS = "pass"
    REGRESSION = "regression"
    INCONCLUSIVE = "inconclusive"


def relative_change(t_a: float, t_b: float) -> float:
    """Percent change of candidate duration t_b relative to baseline t_a."""
    if t_a <= 0:
        raise ZeroDivisionError(f"baseline duration must be > 0, got {t_a}")
    return (t_b - t_a) / t_a * 100.0


def filter_cold_starts(mset: "MeasurementSet") -> "MeasurementSet":
    """Drop cold-start measurements, removing affected pairs whole.

    Measurements are paired per (instance, repetition); if any member of a
    pair is cold the entire pair is discarded so no repetition survives
    half-measured.
    """
    cold_keys = {(m.instance_id, m.repetition) for m in mset.measurements if m.cold}
    kept = [m for m in mset.measurements if (m.instance_id, m.repetition) not in cold_keys]
    return replace(mset, measurements=kept)


def _trim_count(n: int, level: float) -> int:
    # Tiny epsilon corrects binary float drift for decimal levels such as
    # 0.90, where n*(1-level)/2 lands a hair below the intended integer.
    return int(math.floor(n * (1.0 - level) / 2.0 + 1e-9))


def percentile_interval(samples: Sequence[float], level: float) -> ConfidenceInterval:
    """Equal-tail trimming interval over raw samples.

    Sort ascending (stable), remove floor(n*(1-level)/2) values from each
    end, and return the remaining minimum and maximum as the bounds.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise EmptySamplesError("cannot build an interval from zero samples")
    ordered = np.sort(values, kind="stable")
    k = _trim_count(ordered.size, level)
    return ConfidenceInterval(lower_pct=float(ordered[k]), upper_pct=float(ordered[ordered.size - 1 - k]), level=level)


def _as_values(samples: Iterable) -> np.ndarray:
    data = list(samples)
    if data and isinstance(data[0], PairedSample):
        data = [s.change_pct for s in data]
    return np.asarray(data, dtype=float)


def bootstrap_ci(
    samples: Sequence,
    level: float = DEFAULT_LEVEL,
    resamples: int = DEFAULT_RESAMPLES,
    rng: np.random.Generator | int | None = None,
    *,
    min_samples: int = MIN_SAMPLE_SIZE,
) -> ConfidenceInterval:
    """Percentile bootstrap CI of the median relative change.

    Draws `resamples` same-size resamples with replacement, takes the median
    of each and applies `percentile_interval` to the medians. `samples` may
    be PairedSamples or plain numbers; `rng` may be a Generator or a seed.
    """
    values = _as_values(samples)
    if values.size < min_samples:
        raise InsufficientSamplesError(
            f"bootstrap needs >= {min_samples} samples, got {values.size}; "
            "intervals over fewer samples come out too narrow"
        )
    if resamples < 1000:
        raise ValueError(f"resamples must be >= 1000, got {resamples}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    n = values.size
    medians = np.empty(resamples, dtype=float)
    done = 0
    while done < resamples:
        chunk = min(_RESAMPLE_CHUNK, resamples - done)
        idx = gen.integers(0, n, size=(chunk, n))
        medians[done : done + chunk] = np.median(values[idx], axis=1)
        done += chunk
    return percentile_interval(medians, level)


def sweep_sample_size(
    samples: Sequence,
    start: int,
    stop: int,
    step: int,
    level: float = DEFAULT_LEVEL,
    resamples: int = DEFAULT_RESAMPLES,
    rng: np.random.Generator | int | None = None,
    *,
    min_samples: int = MIN_SAMPLE_SIZE,
) -> list[tuple[int, float]]:
    """CI width as a function of sample count.

    For each n in start, start+step, ..., stop (inclusive) the bootstrap CI
    is computed over the first n samples; returns the (n, width_pp) series.
    """
    values = _as_values(samples)
    if step < 1:
        raise ValueError(f"step must be >= 1, got {step}")
    if start < min_samples:
        raise InsufficientSamplesError(f"sweep start {start} is below the minimum sample size {min_samples}")
    if start > stop:
        raise SweepRangeError(f"sweep start {start} exceeds stop {stop}")
    if stop > values.size:
        raise SweepRangeError(f"sweep stop {stop} exceeds the {values.size} available samples")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    series: list[tuple[int, float]] = []
    for n in range(start, stop + 1, step):
        ci = bootstrap_ci(values[:n], level, resamples, gen, min_samples=min_samples)
        series.append((n, ci.width_pp))
    return series


def verdict(ci: ConfidenceInterval, threshold_pct: float) -> Verdict:
    """Gate decision: the whole CI must clear the threshold either way."""
    if ci.lower_pct > threshold_pct:
        return Verdict.REGRESSION
    if ci.upper_pct < threshold_pct:
        return Verdict.PASS
    return Verdict.INCONCLUSIVE
