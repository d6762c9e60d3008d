"""Exception hierarchy for the benchmarking harness."""


class BenchmarkError(Exception):
    """Base class for all harness errors."""


class InvalidWorkloadError(BenchmarkError):
    """Workload parameters are out of range (e.g. scale < 2)."""


class InvalidRegressionError(BenchmarkError):
    """Negative regression percentage."""


class ExecutionError(BenchmarkError):
    """A workload invocation failed or a worker died."""


class InsufficientCoresError(BenchmarkError):
    """Host does not expose the CPU cores a core plan requires."""


class AffinityUnsupportedError(BenchmarkError):
    """CPU pinning was requested but the platform cannot set affinity."""


class BarrierTimeoutError(BenchmarkError):
    """Workers did not rendezvous at the start barrier in time."""


class PairingError(BenchmarkError):
    """Measurements cannot be matched into baseline/candidate pairs."""


class EmptySamplesError(BenchmarkError):
    """An interval was requested over an empty sample list."""


class InsufficientSamplesError(BenchmarkError):
    """Fewer samples than the configured minimum for bootstrapping."""


class SweepRangeError(BenchmarkError):
    """Sample-size sweep bounds do not fit the available samples."""


class ConfigError(BenchmarkError):
    """Invalid experiment configuration."""
