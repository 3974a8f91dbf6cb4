"""Submission queue and admission control.

Queued runs are admitted when both the concurrent-run limit and the free
memory of the cluster allow it; otherwise they are retried on a fixed
interval until they age past ``max_queue_seconds`` and are failed.
"""

from __future__ import annotations

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .cluster import JOBS_POOL, ORCHESTRATION_POOL, Cluster
from .errors import InconsistentState, ValidationError
from .sim_clock import Clock, ScheduleTick, WorkflowSubmitted
from .workflow_model import WorkflowSpec, peak_parallel_demand

SCHEDULING_TIMEOUT = "scheduling-timeout"
UNSCHEDULABLE_POD = "unschedulable-pod"


class RunState(str, Enum):
    QUEUED = "QUEUED"
    RUNNING = "RUNNING"
    FINISHED = "FINISHED"
    FAILED = "FAILED"


_TRANSITIONS = {
    RunState.QUEUED: {RunState.RUNNING, RunState.FAILED},
    RunState.RUNNING: {RunState.FINISHED, RunState.FAILED},
}


@dataclass
class WorkflowRun:
    run_id: str
    spec: WorkflowSpec
    state: RunState = RunState.QUEUED
    submitted_at: float | None = None
    accepted_at: float | None = None
    finished_at: float | None = None
    retry_count: int = 0
    failure_reason: str | None = None
    batch_index: int = 0
    next_attempt_at: float = 0.0

    def transition(self, new_state: RunState) -> None:
        if new_state not in _TRANSITIONS.get(self.state, ()):
            raise InconsistentState(f"run {self.run_id}: {self.state.value} -> {new_state.value}")
        self.state = new_state

    @property
    def scheduling_wait(self) -> float | None:
        if self.accepted_at is None:
            return None
        return self.accepted_at - self.submitted_at

    @property
    def run_time(self) -> float | None:
        if self.accepted_at is None or self.finished_at is None:
            return None
        return self.finished_at - self.accepted_at


@dataclass(frozen=True)
class SchedulerConfig:
    max_concurrent_workflows: int = 10000
    memory_headroom_fraction: float = 0.9
    retry_interval_seconds: float = 30.0
    max_queue_seconds: float = 7200.0

    def __post_init__(self):
        if self.max_concurrent_workflows <= 0:
            raise ValidationError("must be > 0", "scheduler.max_concurrent_workflows")
        if not 0 < self.memory_headroom_fraction <= 1:
            raise ValidationError("must be in (0, 1]", "scheduler.memory_headroom_fraction")
        if self.retry_interval_seconds <= 0:
            raise ValidationError("must be > 0", "scheduler.retry_interval_seconds")
        if self.max_queue_seconds <= 0:
            raise ValidationError("must be > 0", "scheduler.max_queue_seconds")


@dataclass(frozen=True)
class Accept:
    pass


@dataclass(frozen=True)
class Defer:
    reason: str  # "count-limit", "memory" or "orchestrator-memory"


def admission_check(run, cluster, live_count, config, free_jobs_mib=None, free_orch_mib=None):
    """Decide whether ``run`` may start now.

    ``free_jobs_mib``/``free_orch_mib`` override the cluster's node-level free
    memory; a scheduling tick passes views already reduced by the runs it
    accepted earlier in the same scan.
    """
    if run.state is not RunState.QUEUED:
        raise InconsistentState(f"admission check on {run.state.value} run {run.run_id}")
    if live_count >= config.max_concurrent_workflows:
        return Defer("count-limit")
    if free_jobs_mib is None:
        free_jobs_mib = cluster.free_resources(JOBS_POOL)[1]
    if free_orch_mib is None:
        free_orch_mib = cluster.free_resources(ORCHESTRATION_POOL)[1]
    _, peak_mib = peak_parallel_demand(run.spec)
    if peak_mib > config.memory_headroom_fraction * free_jobs_mib:
        return Defer("memory")
    if run.spec.orchestrator_memory_mib > free_orch_mib:
        return Defer("orchestrator-memory")
    return Accept()


class RunStore:
    """In-process stand-in for the run database: last persisted snapshot per run."""

    def __init__(self):
        self.records: dict[str, WorkflowRun] = {}
        self.writes = 0

    def persist(self, run: WorkflowRun) -> None:
        self.records[run.run_id] = dataclasses.replace(run)
        self.writes += 1


class Scheduler:
    def __init__(self, clock: Clock, cluster: Cluster, config: SchedulerConfig,
                 start_workflow: Callable[[WorkflowRun], None] | None = None,
                 store: RunStore | None = None):
        self.clock = clock
        self.cluster = cluster
        self.config = config
        self.start_workflow = start_workflow
        self.store = store if store is not None else RunStore()
        self.runs: dict[str, WorkflowRun] = {}
        self.queue: OrderedDict[str, WorkflowRun] = OrderedDict()
        self.live_count = 0
        self.peak_live = 0
        self._tick_times: set[float] = set()
        self._next_run = 0

    def submit_workflow(self, spec: WorkflowSpec, batch_index: int = 0) -> WorkflowRun:
        now = self.clock.now
        run = WorkflowRun(
            run_id=f"run-{self._next_run:06d}",
            spec=spec,
            submitted_at=now,
            batch_index=batch_index,
            next_attempt_at=now,
        )
        self._next_run += 1
        self.runs[run.run_id] = run
        self.queue[run.run_id] = run
        self.clock.schedule(0.0, WorkflowSubmitted(run.run_id))
        self.request_tick(0.0)
        return run

    def request_tick(self, delay: float) -> None:
        # Coalesce: at most one outstanding tick per virtual instant.
        t = self.clock.now + delay
        if t not in self._tick_times:
            self._tick_times.add(t)
            self.clock.schedule(delay, ScheduleTick())

    def schedule_tick(self) -> list[str]:
        now = self.clock.now
        self._tick_times.discard(now)
        free_jobs = self.cluster.free_resources(JOBS_POOL)[1]
        free_orch = self.cluster.free_resources(ORCHESTRATION_POOL)[1]
        accepted = []
        retry = False
        for run in list(self.queue.values()):
            if run.next_attempt_at > now:
                continue  # its own retry tick is already scheduled
            verdict = admission_check(run, self.cluster, self.live_count, self.config,
                                      free_jobs, free_orch)
            if isinstance(verdict, Accept):
                del self.queue[run.run_id]
                run.transition(RunState.RUNNING)
                run.accepted_at = now
                self.live_count += 1
                self.peak_live = max(self.peak_live, self.live_count)
                free_jobs -= peak_parallel_demand(run.spec)[1]
                free_orch -= run.spec.orchestrator_memory_mib
                accepted.append(run.run_id)
            elif now - run.submitted_at > self.config.max_queue_seconds:
                del self.queue[run.run_id]
                run.transition(RunState.FAILED)
                run.failure_reason = SCHEDULING_TIMEOUT
                run.finished_at = now
                self.store.persist(run)
            else:
                run.retry_count += 1
                run.next_attempt_at = now + self.config.retry_interval_seconds
                retry = True
        if retry:
            self.request_tick(self.config.retry_interval_seconds)
        # Hand-off happens after the scan so the whole tick decides on one snapshot.
        if self.start_workflow is not None:
            for run_id in accepted:
                self.start_workflow(self.runs[run_id])
        return accepted

    def run_left(self, run: WorkflowRun) -> None:
        """Called when a RUNNING run finishes or fails."""
        self.live_count -= 1
