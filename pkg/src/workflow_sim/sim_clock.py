"""Virtual clock and totally ordered future-event queue."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, fields
from typing import Any, Callable

from .errors import HandlerFailure, NegativeDelay


# Event payloads. Each is a small frozen record; the handler is chosen by type.

@dataclass(frozen=True)
class WorkflowSubmitted:
    run_id: str


@dataclass(frozen=True)
class ScheduleTick:
    pass


@dataclass(frozen=True)
class PodBindAttempt:
    pool: str
    pod_id: str = ""


@dataclass(frozen=True)
class PodStarted:
    pod_id: str


@dataclass(frozen=True)
class JobCompleted:
    pod_id: str
    run_id: str
    step_id: str


@dataclass(frozen=True)
class StatusMessage:
    run_id: str
    kind: str
    step_id: str
    emitted_at: float


@dataclass(frozen=True)
class TerminationProcessed:
    run_id: str
    emitted_at: float


@dataclass(frozen=True)
class MetricsSample:
    pass


@dataclass(frozen=True)
class LoadBatch:
    batch_index: int


@dataclass(frozen=True)
class Event:
    fire_at: float
    seq: int
    payload: Any = None

    def __lt__(self, other):
        return (self.fire_at, self.seq) < (other.fire_at, other.seq)


def describe(payload) -> str:
    """Stable ``key=value`` rendering of a payload for trace files."""
    return " ".join(f"{f.name}={_fmt(getattr(payload, f.name))}" for f in fields(payload))


def _fmt(value):
    if isinstance(value, float):
        return format_time(value)
    return str(value)


def format_time(t: float) -> str:
    # Fixed precision keeps traces byte-stable across platforms.
    return f"{t:.6f}"


class Clock:
    def __init__(self, start: float = 0.0):
        self.now = float(start)
        self.pending: list[Event] = []
        self.next_seq = 0

    def schedule(self, delay: float, payload) -> int:
        if delay < 0:
            raise NegativeDelay(f"cannot schedule {type(payload).__name__} with delay {delay}")
        seq = self.next_seq
        self.next_seq += 1
        heapq.heappush(self.pending, Event(self.now + delay, seq, payload))
        return seq

    def peek_time(self) -> float | None:
        return self.pending[0].fire_at if self.pending else None

    def run_until(self, t_end: float, dispatcher: Callable[[Event], None]) -> int:
        """Dispatch every event with ``fire_at <= t_end`` in (fire_at, seq) order.

        Leaves ``now`` at ``t_end`` once the horizon is reached (an empty queue
        counts as reaching it).
        """
        if t_end < self.now:
            raise ValueError(f"t_end {t_end} is before now {self.now}")
        count = 0
        while self.pending and self.pending[0].fire_at <= t_end:
            event = heapq.heappop(self.pending)
            self.now = event.fire_at
            try:
                dispatcher(event)
            except HandlerFailure:
                raise
            except Exception as exc:
                raise HandlerFailure(event.seq, event.fire_at, exc) from exc
            count += 1
        self.now = t_end
        return count
