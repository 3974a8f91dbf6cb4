"""Workflow specifications: a DAG of resource-annotated steps.

A spec document looks like::

    name: pmssm
    orchestrator: {cores_millicores: 100, memory_mib: 256}
    steps:
      - id: ntuple-1
        depends_on: []
        cores_millicores: 1000
        memory_mib: 2000
        duration: {kind: fixed, seconds: 360}

YAML and JSON are both accepted (JSON is a subset of YAML).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any

import yaml

from .errors import SpecSyntaxError, ValidationError

DEFAULT_ORCHESTRATOR_MILLICORES = 100
DEFAULT_ORCHESTRATOR_MIB = 256


@dataclass(frozen=True)
class DurationModel:
    kind: str
    seconds: float = 0.0
    min_seconds: float = 0.0
    max_seconds: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ValidationError(f"unknown duration kind {self.kind!r}")
        if self.kind == "uniform" and self.min_seconds > self.max_seconds:
            raise ValidationError("min_seconds exceeds max_seconds")
        if min(self.seconds, self.min_seconds, self.max_seconds) < 0:
            raise ValidationError("durations must be non-negative")

    @classmethod
    def fixed(cls, seconds: float) -> DurationModel:
        return cls("fixed", seconds=seconds)

    @classmethod
    def uniform(cls, min_seconds: float, max_seconds: float) -> DurationModel:
        return cls("uniform", min_seconds=min_seconds, max_seconds=max_seconds)

    @property
    def mean(self) -> float:
        if self.kind == "fixed":
            return self.seconds
        return (self.min_seconds + self.max_seconds) / 2

    def sample(self, rng) -> float:
        """Draw one duration from ``rng`` (a ``random.Random``).

        Fixed models never touch the generator, so adding a fixed step to a
        workflow does not shift the random stream of the others.
        """
        if self.kind == "fixed":
            return self.seconds
        return rng.uniform(self.min_seconds, self.max_seconds)


@dataclass(frozen=True)
class StepSpec:
    id: str
    depends_on: tuple[str, ...]
    cores: int
    memory_mib: int
    duration: DurationModel


@dataclass(frozen=True)
class WorkflowSpec:
    name: str
    steps: tuple[StepSpec, ...]
    orchestrator_cores: int = DEFAULT_ORCHESTRATOR_MILLICORES
    orchestrator_memory_mib: int = DEFAULT_ORCHESTRATOR_MIB
    _by_id: dict = field(default=None, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "_by_id", {s.id: s for s in self.steps})
        validate(self)

    def step(self, step_id: str) -> StepSpec:
        return self._by_id[step_id]

    @property
    def step_ids(self) -> list[str]:
        return [s.id for s in self.steps]

    def __contains__(self, step_id):
        return step_id in self._by_id


def _find_cycle(steps: tuple[StepSpec, ...]) -> list[str] | None:
    deps = {s.id: s.depends_on for s in steps}
    color = dict.fromkeys(deps, 0)
    stack: list[str] = []

    def visit(node):
        color[node] = 1
        stack.append(node)
        for d in sorted(deps[node]):
            if color[d] == 1:
                return stack[stack.index(d):] + [d]
            if color[d] == 0:
                found = visit(d)
                if found:
                    return found
        stack.pop()
        color[node] = 2
        return None

    for sid in sorted(deps):
        if color[sid] == 0:
            found = visit(sid)
            if found:
                return found
    return None


def validate(spec: WorkflowSpec) -> None:
    if not spec.steps:
        raise ValidationError("workflow has no steps", spec.name)
    seen = set()
    for s in spec.steps:
        if s.id in seen:
            raise ValidationError("duplicate step id", s.id)
        seen.add(s.id)
    for s in spec.steps:
        if s.cores < 1:
            raise ValidationError("cores_millicores must be >= 1", s.id)
        if s.memory_mib < 1:
            raise ValidationError("memory_mib must be >= 1", s.id)
        if s.id in s.depends_on:
            raise ValidationError("step depends on itself", s.id)
        for d in s.depends_on:
            if d not in seen:
                raise ValidationError(f"depends on unknown step {d!r}", s.id)
    if spec.orchestrator_cores < 0 or spec.orchestrator_memory_mib < 0:
        raise ValidationError("orchestrator requests must be non-negative", "orchestrator")
    cycle = _find_cycle(spec.steps)
    if cycle:
        raise ValidationError("dependency cycle " + " -> ".join(cycle), cycle[0])


def _require(mapping, key, where):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ValidationError(f"missing field {key!r}", where)
    return mapping[key]


def _positive_int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {value!r}", where)
    if value < 1:
        raise ValidationError(f"must be positive, got {value}", where)
    return value


def _positive_number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", where)
    if value <= 0:
        raise ValidationError(f"must be positive, got {value}", where)
    return float(value)


def _parse_duration(doc, where) -> DurationModel:
    kind = _require(doc, "kind", where)
    if kind == "fixed":
        return DurationModel.fixed(_positive_number(_require(doc, "seconds", where), where + ".seconds"))
    if kind == "uniform":
        lo = _positive_number(_require(doc, "min_seconds", where), where + ".min_seconds")
        hi = _positive_number(_require(doc, "max_seconds", where), where + ".max_seconds")
        if lo > hi:
            raise ValidationError("min_seconds exceeds max_seconds", where)
        return DurationModel.uniform(lo, hi)
    raise ValidationError(f"unknown duration kind {kind!r}", where + ".kind")


def workflow_from_dict(doc: Any) -> WorkflowSpec:
    if not isinstance(doc, dict):
        raise ValidationError("workflow document must be a mapping")
    name = str(_require(doc, "name", "workflow"))
    orch = doc.get("orchestrator") or {}
    orch_cores = orch.get("cores_millicores", DEFAULT_ORCHESTRATOR_MILLICORES)
    orch_mem = orch.get("memory_mib", DEFAULT_ORCHESTRATOR_MIB)
    raw_steps = _require(doc, "steps", "workflow")
    if not isinstance(raw_steps, list):
        raise ValidationError("steps must be a list", "steps")
    steps = []
    for i, raw in enumerate(raw_steps):
        sid = str(_require(raw, "id", f"steps[{i}]"))
        deps = raw.get("depends_on") or []
        if not isinstance(deps, list):
            raise ValidationError("depends_on must be a list", sid)
        steps.append(
            StepSpec(
                id=sid,
                depends_on=tuple(str(d) for d in deps),
                cores=_positive_int(_require(raw, "cores_millicores", sid), sid),
                memory_mib=_positive_int(_require(raw, "memory_mib", sid), sid),
                duration=_parse_duration(_require(raw, "duration", sid), sid + ".duration"),
            )
        )
    return WorkflowSpec(name, tuple(steps), orch_cores, orch_mem)


def parse_workflow_spec(text: str) -> WorkflowSpec:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecSyntaxError(f"malformed workflow document: {exc}") from exc
    return workflow_from_dict(doc)


def workflow_to_dict(spec: WorkflowSpec) -> dict:
    def duration(d: DurationModel):
        if d.kind == "fixed":
            return {"kind": "fixed", "seconds": d.seconds}
        return {"kind": "uniform", "min_seconds": d.min_seconds, "max_seconds": d.max_seconds}

    return {
        "name": spec.name,
        "orchestrator": {
            "cores_millicores": spec.orchestrator_cores,
            "memory_mib": spec.orchestrator_memory_mib,
        },
        "steps": [
            {
                "id": s.id,
                "depends_on": list(s.depends_on),
                "cores_millicores": s.cores,
                "memory_mib": s.memory_mib,
                "duration": duration(s.duration),
            }
            for s in spec.steps
        ],
    }


@lru_cache(maxsize=256)
def topological_order(spec: WorkflowSpec) -> tuple[str, ...]:
    """Kahn's algorithm with a min-heap, giving the lexicographically smallest order."""
    indegree = {s.id: len(set(s.depends_on)) for s in spec.steps}
    dependents: dict[str, list[str]] = {s.id: [] for s in spec.steps}
    for s in spec.steps:
        for d in set(s.depends_on):
            dependents[d].append(s.id)
    heap = [sid for sid, n in indegree.items() if n == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        sid = heapq.heappop(heap)
        order.append(sid)
        for nxt in dependents[sid]:
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                heapq.heappush(heap, nxt)
    return tuple(order)


def ready_steps(spec: WorkflowSpec, completed, dispatched) -> set[str]:
    return {
        s.id
        for s in spec.steps
        if s.id not in dispatched and all(d in completed for d in s.depends_on)
    }


@lru_cache(maxsize=256)
def step_levels(spec: WorkflowSpec) -> dict[str, int]:
    """Longest-path depth of each step from the sources (sources are level 0)."""
    level: dict[str, int] = {}
    for sid in topological_order(spec):
        deps = spec.step(sid).depends_on
        level[sid] = 1 + max(level[d] for d in deps) if deps else 0
    return level


@lru_cache(maxsize=256)
def peak_parallel_demand(spec: WorkflowSpec) -> tuple[int, int]:
    per_level_cores: dict[int, int] = {}
    per_level_mem: dict[int, int] = {}
    for sid, lvl in step_levels(spec).items():
        s = spec.step(sid)
        per_level_cores[lvl] = per_level_cores.get(lvl, 0) + s.cores
        per_level_mem[lvl] = per_level_mem.get(lvl, 0) + s.memory_mib
    return (
        max(per_level_cores.values()) + spec.orchestrator_cores,
        max(per_level_mem.values()) + spec.orchestrator_memory_mib,
    )


def critical_path(spec: WorkflowSpec, durations: dict[str, float], per_step_delay: float = 0.0) -> float:
    """Longest path through the DAG where each step costs its duration plus ``per_step_delay``."""
    finish: dict[str, float] = {}
    for sid in topological_order(spec):
        start = max((finish[d] for d in spec.step(sid).depends_on), default=0.0)
        finish[sid] = start + per_step_delay + durations[sid]
    return max(finish.values())


def mean_makespan(spec: WorkflowSpec, bind_delay_seconds: float = 0.0) -> float:
    return critical_path(spec, {s.id: s.duration.mean for s in spec.steps}, bind_delay_seconds)
