"""Run and utilization statistics, overflow detection and capacity oracles."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from itertools import groupby

from .cluster import UtilizationSample  # noqa: F401  (re-exported)
from .errors import EmptyBatch, OverloadedWindow, TooFewBatches, WindowTooShort
from .scheduler import RunState
from .workflow_model import WorkflowSpec, mean_makespan

OVERFLOW_SLOPE_THRESHOLD = 10.0  # seconds of median wait per batch
OVERFLOW_GROWTH_RATIO = 2.0
SUSTAINABLE_SIZING_FACTOR = 1.3


class Verdict(str, Enum):
    OVERLOADED = "Overloaded"
    SUSTAINABLE = "Sustainable"


@dataclass(frozen=True)
class RunMetrics:
    run_id: str
    batch_index: int
    scheduling_wait_s: float
    run_time_s: float | None
    state: RunState


def run_metrics(runs, horizon: float) -> list[RunMetrics]:
    """Per-run wait and run time.

    The wait of a run that never started is its time in the queue: up to the
    failure for FAILED runs, up to ``horizon`` (a lower bound) for runs still
    QUEUED when the simulation stopped.
    """
    out = []
    for run in runs:
        if run.accepted_at is not None:
            wait = run.accepted_at - run.submitted_at
        elif run.state is RunState.FAILED:
            wait = run.finished_at - run.submitted_at
        else:
            wait = horizon - run.submitted_at
        out.append(RunMetrics(run.run_id, run.batch_index, wait, run.run_time, run.state))
    return out


def median(values) -> float:
    xs = sorted(values)
    if not xs:
        raise EmptyBatch("median of an empty set")
    mid = len(xs) // 2
    if len(xs) % 2:
        return float(xs[mid])
    return (xs[mid - 1] + xs[mid]) / 2


def percentile_nearest_rank(values, pct: float) -> float:
    xs = sorted(values)
    if not xs:
        raise EmptyBatch("percentile of an empty set")
    rank = max(1, math.ceil(pct / 100 * len(xs)))
    return float(xs[rank - 1])


def batch_wait_series(runs, batch_count: int | None = None) -> list[tuple[int, float, float]]:
    """(batch_index, median wait, p95 wait) per batch, in batch order."""
    keyed = sorted(runs, key=lambda r: r.batch_index)
    groups = {b: [r.scheduling_wait_s for r in rs] for b, rs in groupby(keyed, key=lambda r: r.batch_index)}
    if batch_count is not None:
        for b in range(1, batch_count + 1):
            if b not in groups:
                raise EmptyBatch(f"batch {b} has no runs")
    return [(b, median(w), percentile_nearest_rank(w, 95)) for b, w in sorted(groups.items())]


def least_squares_slope(xs, ys) -> float:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    sxx = sum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        return 0.0
    return sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sxx


def detect_overflow(medians, slope_threshold: float = OVERFLOW_SLOPE_THRESHOLD,
                    growth_ratio: float = OVERFLOW_GROWTH_RATIO) -> Verdict:
    medians = list(medians)
    if len(medians) < 4:
        raise TooFewBatches(f"need at least 4 batches, got {len(medians)}")
    tail = math.ceil(len(medians) / 2)
    xs = list(range(len(medians) - tail, len(medians)))
    slope = least_squares_slope(xs, medians[-tail:])
    if slope > slope_threshold and medians[-1] >= growth_ratio * medians[0]:
        return Verdict.OVERLOADED
    return Verdict.SUSTAINABLE


def required_core_capacity(spec: WorkflowSpec, arrival_rate: float,
                           bind_delay_seconds: float = 5.0) -> float:
    """Steady-state mean core demand in millicores (Little's law on core-seconds).

    Step work is cores x mean duration; the orchestrator is held for the
    expected makespan (mean critical path plus one bind delay per step on it).
    """
    if arrival_rate <= 0:
        raise ValueError("arrival_rate must be positive")
    step_work = sum(s.cores * s.duration.mean for s in spec.steps)
    orchestrator_work = spec.orchestrator_cores * mean_makespan(spec, bind_delay_seconds)
    return arrival_rate * (step_work + orchestrator_work)


def running_count_integral(runs, t0: float, t1: float) -> float:
    """Integral of the number of RUNNING runs over [t0, t1]."""
    total = 0.0
    for run in runs:
        if run.accepted_at is None:
            continue
        end = run.finished_at if run.finished_at is not None else math.inf
        lo, hi = max(run.accepted_at, t0), min(end, t1)
        if hi > lo:
            total += hi - lo
    return total


def littles_law_check(runs, t0: float, t1: float, verdict: Verdict | None = None,
                      min_completions: int = 10) -> float:
    """Relative error |L - lambda W| / L over the window (t0, t1].

    L is the time-averaged number of RUNNING workflows, lambda the completion
    rate and W the mean run time of the runs completing inside the window.
    """
    if verdict is Verdict.OVERLOADED:
        raise OverloadedWindow("Little's law needs a steady (Sustainable) window")
    if t1 <= t0:
        raise WindowTooShort("empty window")
    done = [r for r in runs
            if r.state is RunState.FINISHED and t0 < r.finished_at <= t1]
    if len(done) < min_completions:
        raise WindowTooShort(f"{len(done)} completions in window, need {min_completions}")
    span = t1 - t0
    occupancy = running_count_integral(runs, t0, t1) / span
    throughput = len(done) / span
    mean_residence = sum(r.run_time for r in done) / len(done)
    return abs(occupancy - throughput * mean_residence) / occupancy


def time_weighted_fraction(trace, capacity: float, t0: float, t1: float) -> float:
    """Mean of a piecewise-constant allocation over [t0, t1], divided by ``capacity``.

    ``trace`` is a list of (time, allocated) change points sorted by time; the
    value holds until the next change point.
    """
    if t1 <= t0:
        raise ValueError("empty window")
    area = 0.0
    for i, (t, alloc) in enumerate(trace):
        nxt = trace[i + 1][0] if i + 1 < len(trace) else math.inf
        lo, hi = max(t, t0), min(nxt, t1)
        if hi > lo:
            area += alloc * (hi - lo)
    return area / (t1 - t0) / capacity

