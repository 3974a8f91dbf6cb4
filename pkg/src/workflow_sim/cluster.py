"""Simulated cluster: node pools, first-fit placement, pending-pod FIFO, utilization."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

from .errors import DoubleRelease, InconsistentState, RequestExceedsLargestNode
from .sim_clock import Clock, PodBindAttempt, PodStarted

ORCHESTRATION_POOL = "orchestration"
JOBS_POOL = "jobs"
POOLS = (ORCHESTRATION_POOL, JOBS_POOL)


class PodState(str, Enum):
    PENDING = "PENDING"
    BOUND = "BOUND"
    RUNNING = "RUNNING"
    SUCCEEDED = "SUCCEEDED"
    DELETED = "DELETED"


# Allowed forward transitions; DELETED is reachable from anywhere.
_NEXT = {
    PodState.PENDING: PodState.BOUND,
    PodState.BOUND: PodState.RUNNING,
    PodState.RUNNING: PodState.SUCCEEDED,
}
HOLDS_RESOURCES = frozenset({PodState.BOUND, PodState.RUNNING, PodState.SUCCEEDED})


@dataclass(frozen=True)
class PoolConfig:
    name: str
    node_count: int
    cores_millicores_per_node: int
    memory_mib_per_node: int


@dataclass
class Node:
    id: str
    pool: str
    capacity_millicores: int
    capacity_mib: int
    allocated_millicores: int = 0
    allocated_mib: int = 0
    pods: set = field(default_factory=set)

    def fits(self, cores: int, mib: int) -> bool:
        return (
            self.allocated_millicores + cores <= self.capacity_millicores
            and self.allocated_mib + mib <= self.capacity_mib
        )


@dataclass
class Pod:
    id: str
    run_id: str
    kind: str  # "orchestrator" or "job"
    request_millicores: int
    request_mib: int
    pool: str
    step_id: str = ""
    state: PodState = PodState.PENDING
    node_id: str | None = None
    placed_on: str | None = None  # node_id survives deletion here, for traces
    created_at: float | None = None
    bind_eligible_at: float | None = None
    bound_at: float | None = None
    started_at: float | None = None
    finished_at: float | None = None
    deleted_at: float | None = None

    def advance(self, new_state: PodState) -> None:
        if new_state is PodState.DELETED:
            if self.state is PodState.DELETED:
                raise DoubleRelease(f"pod {self.id} already deleted")
        elif _NEXT.get(self.state) is not new_state:
            raise InconsistentState(f"pod {self.id}: {self.state.value} -> {new_state.value}")
        self.state = new_state


@dataclass(frozen=True)
class UtilizationSample:
    time_s: float
    pool: str
    aggregate_fraction: float
    per_node: tuple  # ((node_id, alloc_mc, capacity_mc), ...)

    @property
    def per_node_fractions(self):
        return [(nid, alloc / cap) for nid, alloc, cap in self.per_node]


def kubectl_percent(alloc: int, capacity: int) -> int:
    """Integer percentage as printed by ``kubectl top nodes`` (truncated)."""
    return math.floor(100 * alloc / capacity + 1e-9)


class Cluster:
    def __init__(self, pools, clock: Clock, bind_delay_seconds: float = 5.0):
        if bind_delay_seconds < 0:
            raise ValueError("bind_delay_seconds must be non-negative")
        self.clock = clock
        self.bind_delay_seconds = bind_delay_seconds
        self.nodes: dict[str, list[Node]] = {}
        self.node_by_id: dict[str, Node] = {}
        for cfg in pools:
            width = max(3, len(str(cfg.node_count)))
            nodes = [
                Node(f"{cfg.name}-node-{i:0{width}d}", cfg.name,
                     cfg.cores_millicores_per_node, cfg.memory_mib_per_node)
                for i in range(cfg.node_count)
            ]
            self.nodes[cfg.name] = nodes
            self.node_by_id.update((n.id, n) for n in nodes)
        self.pods: dict[str, Pod] = {}
        self.pending: dict[str, deque] = {name: deque() for name in self.nodes}
        self._allocated = {name: [0, 0] for name in self.nodes}
        self._next_pod = 0
        self._dirty: set[str] = set()
        # Step-function trace of allocation, appended at every bind and release.
        self.allocation_trace: dict[str, list] = {name: [(clock.now, 0, 0)] for name in self.nodes}

    # -- capacity views ----------------------------------------------------

    def capacity(self, pool: str) -> tuple[int, int]:
        nodes = self.nodes[pool]
        return sum(n.capacity_millicores for n in nodes), sum(n.capacity_mib for n in nodes)

    def free_resources(self, pool: str) -> tuple[int, int]:
        cap_mc, cap_mib = self.capacity(pool)
        alloc_mc, alloc_mib = self._allocated[pool]
        return cap_mc - alloc_mc, cap_mib - alloc_mib

    def allocated(self, pool: str) -> tuple[int, int]:
        return tuple(self._allocated[pool])

    def utilization_sample(self, pool: str) -> UtilizationSample:
        nodes = self.nodes[pool]
        cap = sum(n.capacity_millicores for n in nodes)
        alloc = sum(n.allocated_millicores for n in nodes)
        return UtilizationSample(
            time_s=self.clock.now,
            pool=pool,
            aggregate_fraction=alloc / cap if cap else 0.0,
            per_node=tuple((n.id, n.allocated_millicores, n.capacity_millicores) for n in nodes),
        )

    # -- pod life cycle ----------------------------------------------------

    def create_pod(self, run_id: str, kind: str, cores: int, mib: int, step_id: str = "") -> Pod:
        if cores < 0 or mib < 0:
            raise ValueError("pod requests must be non-negative")
        pool = ORCHESTRATION_POOL if kind == "orchestrator" else JOBS_POOL
        if not any(cores <= n.capacity_millicores and mib <= n.capacity_mib for n in self.nodes[pool]):
            raise RequestExceedsLargestNode(
                f"{kind} pod for run {run_id} {step_id} requests {cores} mc / {mib} MiB; "
                f"no {pool} node is that large"
            )
        pod = Pod(
            id=f"pod-{self._next_pod:06d}",
            run_id=run_id,
            kind=kind,
            request_millicores=cores,
            request_mib=mib,
            pool=pool,
            step_id=step_id,
            created_at=self.clock.now,
            bind_eligible_at=self.clock.now + self.bind_delay_seconds,
        )
        self._next_pod += 1
        self.pods[pod.id] = pod
        self.pending[pool].append(pod.id)
        self.clock.schedule(self.bind_delay_seconds, PodBindAttempt(pool, pod.id))
        return pod

    def try_bind(self, pod: Pod) -> str | None:
        """First-fit by ascending node id. Returns the node id, or None when nothing fits."""
        if pod.state is not PodState.PENDING:
            raise InconsistentState(f"pod {pod.id} is {pod.state.value}, not PENDING")
        for node in self.nodes[pod.pool]:
            if node.fits(pod.request_millicores, pod.request_mib):
                break
        else:
            return None
        queue = self.pending[pod.pool]
        if queue and queue[0] == pod.id:
            queue.popleft()
        else:
            queue.remove(pod.id)
        self._allocate(node, pod, +1)
        pod.advance(PodState.BOUND)
        pod.node_id = pod.placed_on = node.id
        pod.bound_at = self.clock.now
        self.clock.schedule(0.0, PodStarted(pod.id))
        return node.id

    def bind_pending(self, pool: str) -> list[Pod]:
        """Bind from the head of the pool's FIFO until the head cannot be placed.

        No backfilling: a head pod that fits nowhere blocks the pods behind it.
        """
        queue = self.pending[pool]
        bound = []
        now = self.clock.now
        while queue:
            pod = self.pods[queue[0]]
            if pod.bind_eligible_at > now or self.try_bind(pod) is None:
                break
            bound.append(pod)
        return bound

    def start_pod(self, pod: Pod) -> None:
        pod.advance(PodState.RUNNING)
        pod.started_at = self.clock.now

    def mark_succeeded(self, pod: Pod) -> None:
        pod.advance(PodState.SUCCEEDED)
        pod.finished_at = self.clock.now

    def release_pod(self, pod: Pod) -> None:
        if pod.state is PodState.DELETED:
            raise DoubleRelease(f"pod {pod.id} already deleted")
        if pod.state in HOLDS_RESOURCES:
            node = self.node_by_id[pod.node_id]
            self._allocate(node, pod, -1)
            pod.node_id = None
        elif pod.state is PodState.PENDING:
            self.pending[pod.pool].remove(pod.id)
        pod.advance(PodState.DELETED)
        pod.deleted_at = self.clock.now
        self.clock.schedule(0.0, PodBindAttempt(pod.pool))

    def _allocate(self, node: Node, pod: Pod, sign: int) -> None:
        node.allocated_millicores += sign * pod.request_millicores
        node.allocated_mib += sign * pod.request_mib
        if sign > 0:
            node.pods.add(pod.id)
        else:
            node.pods.discard(pod.id)
        totals = self._allocated[node.pool]
        totals[0] += sign * pod.request_millicores
        totals[1] += sign * pod.request_mib
        self._dirty.add(node.id)
        trace = self.allocation_trace[node.pool]
        entry = (self.clock.now, totals[0], totals[1])
        if trace[-1][0] == self.clock.now:
            trace[-1] = entry
        else:
            trace.append(entry)

    # -- invariants --------------------------------------------------------

    def check_conservation(self, full: bool = False) -> None:
        """Assert per-node allocation equals the sum of its live pod requests.

        By default only nodes touched since the previous call are rechecked.
        """
        node_ids = self.node_by_id if full else self._dirty
        for nid in node_ids:
            node = self.node_by_id[nid]
            mc = mib = 0
            for pid in node.pods:
                pod = self.pods[pid]
                if pod.state not in HOLDS_RESOURCES or pod.node_id != nid:
                    raise AssertionError(f"pod {pid} on {nid} in state {pod.state.value}")
                mc += pod.request_millicores
                mib += pod.request_mib
            if (mc, mib) != (node.allocated_millicores, node.allocated_mib):
                raise AssertionError(f"node {nid} allocation drifted: {(mc, mib)} vs "
                                     f"{(node.allocated_millicores, node.allocated_mib)}")
            if not (0 <= mc <= node.capacity_millicores and 0 <= mib <= node.capacity_mib):
                raise AssertionError(f"node {nid} over capacity: {mc} mc / {mib} MiB")
        self._dirty.clear()
        if full:
            for pool, queue in self.pending.items():
                queued = set(queue)
                for pod in self.pods.values():
                    if pod.pool == pool and (pod.state is PodState.PENDING) != (pod.id in queued):
                        raise AssertionError(f"pod {pod.id} pending-queue mismatch")
