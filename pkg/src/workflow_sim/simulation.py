"""Wires clock, cluster, scheduler and executor into one runnable simulation."""

from __future__ import annotations

import dataclasses
import random
from dataclasses import dataclass

from . import metrics
from .cluster import JOBS_POOL, Cluster
from .executor import Executor
from .metrics import Verdict
from .scenario import ScenarioConfig
from .scheduler import RunState, Scheduler
from .sim_clock import (
    Clock,
    JobCompleted,
    LoadBatch,
    MetricsSample,
    PodBindAttempt,
    PodStarted,
    ScheduleTick,
    StatusMessage,
    TerminationProcessed,
    WorkflowSubmitted,
    describe,
    format_time,
)


def generate_load(config: ScenarioConfig, clock: Clock) -> int:
    """Schedule one LoadBatch per batch at 0, interval, 2 x interval, ..."""
    for k in range(config.load.batch_count):
        clock.schedule(k * config.load.interval_seconds, LoadBatch(k + 1))
    return config.load.batch_count


@dataclass
class SimulationResult:
    config: ScenarioConfig
    runs: list
    series: list  # (batch, median wait, p95 wait)
    verdict: Verdict
    saturation_utilization: float
    required_millicores: float
    littles_error: float | None
    events_processed: int
    conservation_checks: int

    @property
    def failed_runs(self):
        return [r for r in self.runs if r.state is RunState.FAILED]

    @property
    def exit_code(self) -> int:
        if self.failed_runs:
            return 4
        return 3 if self.verdict is Verdict.OVERLOADED else 0


class Simulation:
    def __init__(self, config: ScenarioConfig, seed: int | None = None, record_trace: bool = True,
                 check_invariants: bool = True):
        if seed is not None:
            config = dataclasses.replace(config, seed=seed)
        self.config = config
        self.rng = random.Random(config.seed)
        self.clock = Clock()
        self.cluster = Cluster(config.pools, self.clock, config.bind_delay_seconds)
        self.scheduler = Scheduler(self.clock, self.cluster, config.scheduler)
        self.executor = Executor(self.clock, self.cluster, self.scheduler, self.rng, config.executor)
        self.scheduler.start_workflow = self.executor.start_workflow
        self.record_trace = record_trace
        self.check_invariants = check_invariants
        self.trace: list[str] = []
        self.utilization_rows: list[tuple] = []
        self.conservation_checks = 0
        self._handlers = {
            LoadBatch: self._on_load_batch,
            WorkflowSubmitted: lambda p: None,
            ScheduleTick: lambda p: self.scheduler.schedule_tick(),
            PodBindAttempt: lambda p: self.cluster.bind_pending(p.pool),
            PodStarted: lambda p: self.executor.on_pod_started(self.cluster.pods[p.pod_id]),
            JobCompleted: self._on_job_completed,
            StatusMessage: self.executor.on_status_message,
            TerminationProcessed: lambda p: None,
            MetricsSample: self._on_metrics_sample,
        }

    # -- handlers ----------------------------------------------------------

    def _on_load_batch(self, payload: LoadBatch) -> None:
        spec = self.config.load.workflow
        for _ in range(self.config.load.batch_size):
            self.scheduler.submit_workflow(spec, payload.batch_index)

    def _on_job_completed(self, payload: JobCompleted) -> None:
        self.executor.on_job_completed(self.executor.states[payload.run_id], payload.step_id)

    def _on_metrics_sample(self, payload: MetricsSample) -> None:
        for pool in sorted(self.cluster.nodes):
            sample = self.cluster.utilization_sample(pool)
            for node_id, alloc, cap in sample.per_node:
                self.utilization_rows.append((sample.time_s, pool, node_id, alloc, cap))
        nxt = self.clock.now + self.config.sample_interval_seconds
        if nxt <= self.config.horizon_seconds:
            self.clock.schedule(self.config.sample_interval_seconds, MetricsSample())

    def dispatch(self, event) -> None:
        payload = event.payload
        if self.record_trace:
            self.trace.append(
                f"{event.seq},{format_time(event.fire_at)},{type(payload).__name__},{describe(payload)}"
            )
        self._handlers[type(payload)](payload)
        if self.check_invariants:
            self.cluster.check_conservation()
            self.conservation_checks += 1
            if self.scheduler.live_count > self.config.scheduler.max_concurrent_workflows:
                raise AssertionError("concurrent-run limit exceeded")

    # -- driver ------------------------------------------------------------

    def run(self) -> SimulationResult:
        cfg = self.config
        self.clock.schedule(0.0, MetricsSample())
        generate_load(cfg, self.clock)
        processed = self.clock.run_until(cfg.horizon_seconds, self.dispatch)
        if self.check_invariants:
            self.cluster.check_conservation(full=True)

        runs = list(self.scheduler.runs.values())
        run_metrics = metrics.run_metrics(runs, cfg.horizon_seconds)
        series = metrics.batch_wait_series(run_metrics, cfg.load.batch_count)
        verdict = (metrics.detect_overflow([m for _, m, _ in series])
                   if len(series) >= 4 else _short_verdict(series))
        jobs_cap = self.cluster.capacity(JOBS_POOL)[0]
        trace = [(t, mc) for t, mc, _ in self.cluster.allocation_trace[JOBS_POOL]]
        saturation = metrics.time_weighted_fraction(trace, jobs_cap, *cfg.saturation_window)
        required = metrics.required_core_capacity(cfg.load.workflow, cfg.load.arrival_rate,
                                                  cfg.bind_delay_seconds)
        littles = None
        if verdict is Verdict.SUSTAINABLE:
            try:
                littles = metrics.littles_law_check(runs, *cfg.steady_window, verdict=verdict)
            except metrics.WindowTooShort:
                littles = None
        return SimulationResult(
            config=cfg,
            runs=runs,
            series=series,
            verdict=verdict,
            saturation_utilization=saturation,
            required_millicores=required,
            littles_error=littles,
            events_processed=processed,
            conservation_checks=self.conservation_checks,
        )


def _short_verdict(series) -> Verdict:
    # Fewer than four batches: no trend to fit, so only outright growth counts.
    medians = [m for _, m, _ in series]
    if len(medians) >= 2 and medians[-1] > medians[0] + metrics.OVERFLOW_SLOPE_THRESHOLD * (len(medians) - 1) \
            and medians[-1] >= metrics.OVERFLOW_GROWTH_RATIO * medians[0]:
        return Verdict.OVERLOADED
    return Verdict.SUSTAINABLE
