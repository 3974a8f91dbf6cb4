"""Scenario documents: cluster shape, scheduler knobs and the burst load."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .cluster import JOBS_POOL, ORCHESTRATION_POOL, PoolConfig
from .errors import SpecSyntaxError, ValidationError
from .executor import ExecutorConfig
from .scheduler import SchedulerConfig
from .workflow_model import WorkflowSpec, parse_workflow_spec, workflow_from_dict

UTILIZATION_SAMPLE_SECONDS = 60.0


@dataclass(frozen=True)
class LoadConfig:
    workflow: WorkflowSpec
    batch_size: int
    interval_seconds: float
    batch_count: int

    @property
    def arrival_rate(self) -> float:
        return self.batch_size / self.interval_seconds

    @property
    def total_submissions(self) -> int:
        return self.batch_size * self.batch_count


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    seed: int
    pools: tuple[PoolConfig, ...]
    bind_delay_seconds: float
    scheduler: SchedulerConfig
    executor: ExecutorConfig
    load: LoadConfig
    horizon_seconds: float
    saturation_window: tuple[float, float]
    steady_window: tuple[float, float]
    sample_interval_seconds: float = UTILIZATION_SAMPLE_SECONDS

    def pool(self, name: str) -> PoolConfig:
        return next(p for p in self.pools if p.name == name)

    def pool_cores(self, name: str) -> int:
        p = self.pool(name)
        return p.node_count * p.cores_millicores_per_node


def _get(doc, key, path, default=...):
    if isinstance(doc, dict) and key in doc:
        return doc[key]
    if default is ...:
        raise ValidationError(f"missing field {key!r}", path)
    return default


def _int(value, path, minimum=1):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"expected an integer, got {value!r}", path)
    if value < minimum:
        raise ValidationError(f"must be >= {minimum}, got {value}", path)
    return value


def _num(value, path, minimum=0.0, strict=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"expected a number, got {value!r}", path)
    if value < minimum or (strict and value == minimum):
        raise ValidationError(f"must be {'>' if strict else '>='} {minimum}, got {value}", path)
    return float(value)


def _window(raw, default, path):
    if raw is None:
        return default
    if not isinstance(raw, list) or len(raw) != 2:
        raise ValidationError("expected [start, end]", path)
    lo, hi = _num(raw[0], path + "[0]"), _num(raw[1], path + "[1]")
    if hi <= lo:
        raise ValidationError("window end must follow its start", path)
    return (lo, hi)


def _resolve_workflow(raw, base_dir: Path | None) -> WorkflowSpec:
    if isinstance(raw, dict):
        return workflow_from_dict(raw)
    if isinstance(raw, str):
        path = Path(raw)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read workflow spec {path}: {exc}", "load.workflow_spec")
        return parse_workflow_spec(text)
    raise ValidationError("expected a path or an inline mapping", "load.workflow_spec")


def scenario_from_dict(doc, base_dir: Path | None = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ValidationError("scenario document must be a mapping")
    name = str(_get(doc, "name", "name"))
    seed = _get(doc, "seed", "seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ValidationError("must be a 64-bit unsigned integer", "seed")

    cluster = _get(doc, "cluster", "cluster")
    raw_pools = _get(cluster, "pools", "cluster.pools")
    if not isinstance(raw_pools, list):
        raise ValidationError("expected a list", "cluster.pools")
    pools = []
    for i, raw in enumerate(raw_pools):
        path = f"cluster.pools[{i}]"
        pname = _get(raw, "name", path + ".name")
        if pname not in (ORCHESTRATION_POOL, JOBS_POOL):
            raise ValidationError(f"unknown pool {pname!r}", path + ".name")
        pools.append(PoolConfig(
            pname,
            _int(_get(raw, "node_count", path), path + ".node_count"),
            _int(_get(raw, "cores_millicores_per_node", path), path + ".cores_millicores_per_node"),
            _int(_get(raw, "memory_mib_per_node", path), path + ".memory_mib_per_node"),
        ))
    names = [p.name for p in pools]
    for required in (ORCHESTRATION_POOL, JOBS_POOL):
        if names.count(required) != 1:
            raise ValidationError(f"exactly one {required!r} pool required", "cluster.pools")
    bind_delay = _num(_get(cluster, "bind_delay_seconds", "cluster", 5.0), "cluster.bind_delay_seconds")

    sched = _get(doc, "scheduler", "scheduler", {}) or {}
    defaults = SchedulerConfig()
    scheduler = SchedulerConfig(
        max_concurrent_workflows=_int(_get(sched, "max_concurrent_workflows", "", defaults.max_concurrent_workflows),
                                      "scheduler.max_concurrent_workflows"),
        memory_headroom_fraction=_num(_get(sched, "memory_headroom_fraction", "", defaults.memory_headroom_fraction),
                                      "scheduler.memory_headroom_fraction"),
        retry_interval_seconds=_num(_get(sched, "retry_interval_seconds", "", defaults.retry_interval_seconds),
                                    "scheduler.retry_interval_seconds"),
        max_queue_seconds=_num(_get(sched, "max_queue_seconds", "", defaults.max_queue_seconds),
                               "scheduler.max_queue_seconds"),
    )

    ex = _get(doc, "executor", "executor", {}) or {}
    executor = ExecutorConfig(
        termination_latency_seconds=_num(_get(ex, "termination_latency_seconds", "", 5.0),
                                         "executor.termination_latency_seconds"),
    )

    load_doc = _get(doc, "load", "load")
    load = LoadConfig(
        workflow=_resolve_workflow(_get(load_doc, "workflow_spec", "load.workflow_spec"), base_dir),
        batch_size=_int(_get(load_doc, "batch_size", "load.batch_size"), "load.batch_size"),
        interval_seconds=_num(_get(load_doc, "interval_seconds", "load.interval_seconds"),
                              "load.interval_seconds", strict=True),
        batch_count=_int(_get(load_doc, "batch_count", "load.batch_count"), "load.batch_count"),
    )
    horizon = _num(_get(doc, "horizon_seconds", "horizon_seconds"), "horizon_seconds", strict=True)
    if horizon < load.interval_seconds * load.batch_count:
        raise ValidationError(
            f"horizon {horizon} is shorter than the load schedule "
            f"({load.batch_count} x {load.interval_seconds} s)", "horizon_seconds")

    interval, n = load.interval_seconds, load.batch_count
    if n >= 4:
        sat_default = (2 * interval, (n - 1) * interval)
    else:
        sat_default = (0.0, n * interval)
    steady_default = (interval, n * interval) if n >= 2 else (0.0, horizon)
    mdoc = _get(doc, "metrics", "metrics", {}) or {}
    saturation = _window(mdoc.get("saturation_window"), sat_default, "metrics.saturation_window")
    steady = _window(mdoc.get("steady_window"), steady_default, "metrics.steady_window")
    sample = _num(mdoc.get("sample_interval_seconds", UTILIZATION_SAMPLE_SECONDS),
                  "metrics.sample_interval_seconds", strict=True)

    return ScenarioConfig(
        name=name,
        seed=seed,
        pools=tuple(pools),
        bind_delay_seconds=bind_delay,
        scheduler=scheduler,
        executor=executor,
        load=load,
        horizon_seconds=horizon,
        saturation_window=saturation,
        steady_window=steady,
        sample_interval_seconds=sample,
    )


def parse_scenario(text: str, base_dir: Path | str | None = None) -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SpecSyntaxError(f"malformed scenario document: {exc}") from exc
    return scenario_from_dict(doc, Path(base_dir) if base_dir is not None else None)


def load_scenario(path: Path | str) -> ScenarioConfig:
    path = Path(path)
    return parse_scenario(path.read_text(), path.parent)
