"""Live execution engine: pinned worker processes with a synchronized start.

Duet invocations run the two workload versions in two persistent worker
processes, each pinned to its own CPU core, that share the host's memory.
The coordinator (this process) owns a three-party barrier: for every
repetition it dispatches both tasks, then everyone waits at the barrier, so
neither worker starts its work before the other is ready. Workers are
processes rather than threads because the interpreter lock would otherwise
serialize two CPU-bound Python workloads.

Each invocation is timed with both per-thread CPU time and wall-clock
timestamps; which one ends up in the Measurement is decided by the clock
mode (duet defaults to CPU time, solo invocations to wall clock).

Set the DUETBENCH_NO_PIN environment variable to run without core pinning on
machines where affinity rights are unavailable.
"""

from __future__ import annotations

import multiprocessing as mp
import os
import threading
import time
import warnings
from dataclasses import dataclass

from .errors import (
    AffinityUnsupportedError,
    BarrierTimeoutError,
    ExecutionError,
    InsufficientCoresError,
)
from .measurement import ClockMode, Measurement, Strategy, default_clock
from .workloads import WorkloadSpec, WorkResult, run_workload

DISABLE_PIN_ENV = "DUETBENCH_NO_PIN"

DEFAULT_BARRIER_TIMEOUT_S = 5.0

# fork keeps worker startup cheap and works regardless of how the caller's
# main module was loaded; platforms without fork fall back to spawn.
_CTX = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else mp.get_context("spawn")


def available_cores() -> int:
    """Logical cores usable for pinning (respects an existing affinity mask)."""
    if hasattr(os, "sched_getaffinity"):
        return len(os.sched_getaffinity(0))
    return os.cpu_count() or 1


def pinning_supported() -> bool:
    return hasattr(os, "sched_setaffinity")


def pinning_disabled_by_env() -> bool:
    return os.environ.get(DISABLE_PIN_ENV, "") not in ("", "0", "false", "False")


@dataclass(frozen=True)
class CorePlan:
    """Distinct core assignment for the two duet workers."""

    core_a: int
    core_b: int

    def __post_init__(self) -> None:
        if self.core_a < 0 or self.core_b < 0:
            raise ValueError(f"core indices must be >= 0, got ({self.core_a}, {self.core_b})")
        if self.core_a == self.core_b:
            raise ValueError(f"duet workers need distinct cores, got {self.core_a} twice")


@dataclass(frozen=True)
class BarrierTrace:
    """Synchronization diagnostics from the most recent duet invocation.

    Timestamps are monotonic-clock nanoseconds, comparable across the
    coordinator and worker processes. `release_ns` is taken by the
    coordinator immediately before it arrives at the barrier, so it lower
    bounds the instant both workers were released.
    """

    release_ns: int
    start_a_ns: int
    start_b_ns: int
    affinity_a: tuple[int, ...] | None
    affinity_b: tuple[int, ...] | None


def timed_run(spec: WorkloadSpec) -> tuple[WorkResult, int, int]:
    """Run one workload, returning (result, cpu_time_ns, wall_clock_ns)."""
    wall0 = time.perf_counter_ns()
    cpu0 = time.thread_time_ns()
    result = run_workload(spec)
    cpu_ns = time.thread_time_ns() - cpu0
    wall_ns = time.perf_counter_ns() - wall0
    return result, max(cpu_ns, 1), max(wall_ns, 1)


def _pin_current_thread(core: int) -> tuple[int, ...]:
    if not pinning_supported():
        raise AffinityUnsupportedError("platform cannot set CPU affinity")
    try:
        os.sched_setaffinity(0, {core})
    except OSError as exc:
        raise AffinityUnsupportedError(f"cannot pin to core {core}: {exc}") from exc
    return tuple(sorted(os.sched_getaffinity(0)))


def _check_core_index(core: int) -> None:
    cores = available_cores()
    if core >= cores:
        raise InsufficientCoresError(f"core {core} requested but host exposes {cores} cores")


def solo_invoke(
    spec: WorkloadSpec,
    core: int | None = None,
    clock: ClockMode = ClockMode.WALL_CLOCK,
    *,
    strategy: Strategy = Strategy.INDEPENDENT,
    repetition: int = 0,
    instance_id: int = 0,
    order_position: int | None = None,
) -> Measurement:
    """Run one workload alone in this process and time it.

    With `core` set (and pinning not disabled via environment), the calling
    thread is pinned for the duration of the run and restored afterwards.
    Live invocations are never cold: process startup is not being measured.
    """
    pin = core is not None and not pinning_disabled_by_env()
    previous: set[int] | None = None
    if pin:
        _check_core_index(core)
        previous = set(os.sched_getaffinity(0)) if pinning_supported() else None
        _pin_current_thread(core)
    try:
        result, cpu_ns, wall_ns = timed_run(spec)
    except MemoryError as exc:
        raise ExecutionError(f"workload exhausted resources: {exc!r}") from exc
    finally:
        if pin and previous is not None:
            os.sched_setaffinity(0, previous)
    duration = cpu_ns if clock is ClockMode.CPU_TIME else wall_ns
    return Measurement(
        duration_ns=duration,
        clock_mode=clock,
        version_label=spec.version_label,
        strategy=strategy,
        instance_id=instance_id,
        repetition=repetition,
        cold=False,
        order_position=order_position,
        result=result,
    )


def _worker_main(conn, barrier, barrier_timeout_s: float) -> None:
    """Worker loop: receive a task, rendezvous at the barrier, run, report."""
    while True:
        msg = conn.recv()
        if msg[0] == "stop":
            return
        _, spec, core = msg
        error: str | None = None
        affinity: tuple[int, ...] | None = None
        if core is not None:
            try:
                affinity = _pin_current_thread(core)
            except AffinityUnsupportedError as exc:
                error = f"affinity:{exc}"
        elif pinning_supported():
            affinity = tuple(sorted(os.sched_getaffinity(0)))
        # Always rendezvous, even on error, so the peer is not left hanging.
        try:
            barrier.wait(barrier_timeout_s)
        except threading.BrokenBarrierError:
            conn.send(("err", "barrier:broken or timed out"))
            continue
        start_ns = time.monotonic_ns()
        if error is not None:
            conn.send(("err", error))
            continue
        try:
            result, cpu_ns, wall_ns = timed_run(spec)
        except Exception as exc:  # surfaced as ExecutionError in the parent
            conn.send(("err", f"execution:{exc!r}"))
            continue
        conn.send(
            (
                "ok",
                {
                    "cpu_ns": cpu_ns,
                    "wall_ns": wall_ns,
                    "start_ns": start_ns,
                    "affinity": affinity,
                    "checksum": result.checksum,
                    "units_done": result.units_done,
                },
            )
        )


class DuetExecutor:
    """Coordinator owning two persistent duet workers.

    One executor instance serves one caller at a time; distinct executor
    instances must not share core assignments concurrently (the caller's
    responsibility, checked best-effort with a warning). Workers are started
    lazily on the first duet invocation and torn down by `close()` (or the
    context manager).
    """

    _claimed_cores: set[int] = set()  # cores held by executors with live workers

    def __init__(
        self,
        plan: CorePlan | None = None,
        *,
        pinning: bool = True,
        barrier_timeout_s: float = DEFAULT_BARRIER_TIMEOUT_S,
    ) -> None:
        self.plan = plan if plan is not None else CorePlan(0, 1)
        self.pinning = pinning and not pinning_disabled_by_env()
        if self.pinning and not pinning_supported():
            raise AffinityUnsupportedError(
                "platform cannot set CPU affinity; construct with pinning=False "
                f"or set {DISABLE_PIN_ENV}=1 to run unpinned"
            )
        self.barrier_timeout_s = barrier_timeout_s
        self.last_barrier: BarrierTrace | None = None
        self._procs: list[mp.process.BaseProcess] = []
        self._conns: list = []
        self._barrier = None
        self._held_cores: set[int] = set()

    def __enter__(self) -> "DuetExecutor":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _ensure_workers(self) -> None:
        if self._procs and all(p.is_alive() for p in self._procs):
            return
        self._teardown()
        if self.pinning:
            overlap = DuetExecutor._claimed_cores & {self.plan.core_a, self.plan.core_b}
            if overlap:
                warnings.warn(
                    f"cores {sorted(overlap)} are already claimed by another executor; "
                    "concurrent duet runs need disjoint core plans",
                    RuntimeWarning,
                    stacklevel=3,
                )
            self._held_cores = {self.plan.core_a, self.plan.core_b}
            DuetExecutor._claimed_cores |= self._held_cores
        self._barrier = _CTX.Barrier(3)
        for _ in range(2):
            parent_conn, child_conn = _CTX.Pipe()
            proc = _CTX.Process(
                target=_worker_main,
                args=(child_conn, self._barrier, self.barrier_timeout_s),
                daemon=True,
            )
            proc.start()
            child_conn.close()
            self._procs.append(proc)
            self._conns.append(parent_conn)

    def duet_invoke(
        self,
        spec_a: WorkloadSpec,
        spec_b: WorkloadSpec,
        plan: CorePlan | None = None,
        *,
        repetition: int = 0,
        instance_id: int = 0,
        clock: ClockMode | None = None,
    ) -> tuple[Measurement, Measurement]:
        """Run both versions in parallel behind a shared start barrier.

        Returns the (baseline, candidate) measurements in argument order,
        timed with per-worker CPU time unless `clock` overrides it.
        """
        plan = plan if plan is not None else self.plan
        if available_cores() < 2:
            raise InsufficientCoresError(f"duet mode needs >= 2 cores, host exposes {available_cores()}")
        if self.pinning:
            _check_core_index(plan.core_a)
            _check_core_index(plan.core_b)
        self._ensure_workers()
        cores = (plan.core_a, plan.core_b) if self.pinning else (None, None)
        for conn, spec, core in zip(self._conns, (spec_a, spec_b), cores):
            conn.send(("task", spec, core))
        release_ns = time.monotonic_ns()
        try:
            self._barrier.wait(self.barrier_timeout_s)
        except threading.BrokenBarrierError:
            self.close()
            raise BarrierTimeoutError(f"workers did not rendezvous within {self.barrier_timeout_s}s") from None
        replies = [self._recv(i) for i in range(2)]
        payloads = []
        for reply in replies:
            status, payload = reply
            if status != "ok":
                self.close()
                if payload.startswith("affinity:"):
                    raise AffinityUnsupportedError(payload.partition(":")[2])
                if payload.startswith("barrier:"):
                    raise BarrierTimeoutError(payload.partition(":")[2])
                raise ExecutionError(payload)
            payloads.append(payload)
        pa, pb = payloads
        self.last_barrier = BarrierTrace(
            release_ns=release_ns,
            start_a_ns=pa["start_ns"],
            start_b_ns=pb["start_ns"],
            affinity_a=pa["affinity"],
            affinity_b=pb["affinity"],
        )
        clock = clock if clock is not None else default_clock(Strategy.DUET)
        key = "cpu_ns" if clock is ClockMode.CPU_TIME else "wall_ns"
        out = []
        for spec, payload in ((spec_a, pa), (spec_b, pb)):
            out.append(
                Measurement(
                    duration_ns=payload[key],
                    clock_mode=clock,
                    version_label=spec.version_label,
                    strategy=Strategy.DUET,
                    instance_id=instance_id,
                    repetition=repetition,
                    cold=False,
                    result=WorkResult(checksum=payload["checksum"], units_done=payload["units_done"]),
                )
            )
        return out[0], out[1]

    def solo_invoke(
        self,
        spec: WorkloadSpec,
        core: int | None = None,
        clock: ClockMode = ClockMode.WALL_CLOCK,
        **kwargs,
    ) -> Measurement:
        """Single invocation in the coordinator process (see `solo_invoke`)."""
        return solo_invoke(spec, core=core if self.pinning else None, clock=clock, **kwargs)

    def _recv(self, idx: int):
        conn, proc = self._conns[idx], self._procs[idx]
        while not conn.poll(0.2):
            if not proc.is_alive():
                self.close()
                raise ExecutionError(f"duet worker {idx} died (exit code {proc.exitcode})")
        try:
            return conn.recv()
        except EOFError:
            self.close()
            raise ExecutionError(f"duet worker {idx} closed its pipe unexpectedly") from None

    def close(self) -> None:
        for conn in self._conns:
            try:
                conn.send(("stop",))
            except (BrokenPipeError, OSError):
                pass
        for proc in self._procs:
            proc.join(timeout=2.0)
            if proc.is_alive():
                proc.terminate()
                proc.join(timeout=1.0)
        self._teardown()

    def _teardown(self) -> None:
        for conn in self._conns:
            try:
                conn.close()
            except OSError:
                pass
        self._conns = []
        self._procs = []
        self._barrier = None
        DuetExecutor._claimed_cores -= self._held_cores
        self._held_cores = set()
