import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from workflow_sim.cluster import Cluster, PoolConfig
from workflow_sim.errors import ValidationError
from workflow_sim.scheduler import (
    SCHEDULING_TIMEOUT,
    Accept,
    Defer,
    RunState,
    Scheduler,
    SchedulerConfig,
    admission_check,
)
from workflow_sim.sim_clock import Clock, ScheduleTick, WorkflowSubmitted
from workflow_sim.simulation import Simulation
from workflow_sim.workflow_model import peak_parallel_demand

from conftest import make_config, pmssm


def make_scheduler(jobs_mib=16384, jobs_nodes=56, config=None):
    clock = Clock()
    cluster = Cluster([PoolConfig("orchestration", 13, 8000, 16384),
                       PoolConfig("jobs", jobs_nodes, 8000, jobs_mib)], clock)
    started = []
    sched = Scheduler(clock, cluster, config or SchedulerConfig(), started.append)
    return clock, cluster, sched, started


def test_submissions_queue_in_order_and_request_one_tick():
    clock, _, sched, _ = make_scheduler()
    runs = [sched.submit_workflow(pmssm(), batch_index=1) for _ in range(200)]
    assert all(r.state is RunState.QUEUED for r in runs)
    assert list(sched.queue) == [r.run_id for r in runs]
    ticks = [e for e in clock.pending if isinstance(e.payload, ScheduleTick)]
    assert len(ticks) == 1 and ticks[0].fire_at == 0
    assert sum(isinstance(e.payload, WorkflowSubmitted) for e in clock.pending) == 200


def test_queue_is_unbounded():
    _, _, sched, _ = make_scheduler()
    for _ in range(1000):
        sched.submit_workflow(pmssm())
    run = sched.submit_workflow(pmssm())
    assert list(sched.queue).index(run.run_id) == 1000


def test_admission_count_limit():
    _, cluster, sched, _ = make_scheduler(config=SchedulerConfig(max_concurrent_workflows=5))
    run = sched.submit_workflow(pmssm())
    assert admission_check(run, cluster, 5, sched.config) == Defer("count-limit")
    assert admission_check(run, cluster, 4, sched.config) == Accept()


def test_admission_memory():
    _, cluster, sched, _ = make_scheduler()
    run = sched.submit_workflow(pmssm())
    assert peak_parallel_demand(run.spec)[1] == 6256
    assert admission_check(run, cluster, 0, sched.config, free_jobs_mib=4000) == Defer("memory")
    # boundary: 6256 <= 0.9 * free  <=>  free >= 6951.1
    assert admission_check(run, cluster, 0, sched.config, free_jobs_mib=6952) == Accept()
    assert admission_check(run, cluster, 0, sched.config, free_jobs_mib=6951) == Defer("memory")


def test_admission_orchestrator_memory():
    _, cluster, sched, _ = make_scheduler()
    run = sched.submit_workflow(pmssm())
    assert admission_check(run, cluster, 0, sched.config, free_orch_mib=255) == Defer("orchestrator-memory")


def test_empty_cluster_accepts():
    _, cluster, sched, _ = make_scheduler()
    run = sched.submit_workflow(pmssm())
    assert admission_check(run, cluster, 0, sched.config) == Accept()


def test_tick_accepts_in_fifo_order_and_defers_the_rest():
    # 0.9 * free must hold exactly two 6256 MiB peaks: free in [13903, 20853)
    clock, cluster, sched, started = make_scheduler(jobs_mib=15000, jobs_nodes=1)
    runs = [sched.submit_workflow(pmssm()) for _ in range(3)]
    accepted = sched.schedule_tick()
    assert accepted == [runs[0].run_id, runs[1].run_id]
    assert [r.run_id for r in started] == accepted
    # conservation oracle: the two accepted peaks fit in the headroom, three would not
    free = cluster.free_resources("jobs")[1]
    assert 2 * 6256 <= 0.9 * free < 3 * 6256
    assert runs[2].state is RunState.QUEUED and runs[2].retry_count == 1
    assert any(isinstance(e.payload, ScheduleTick) and e.fire_at == 30 for e in clock.pending)
    assert sched.live_count == 2


def test_aged_run_fails_with_timeout():
    cfg = SchedulerConfig(max_queue_seconds=300, retry_interval_seconds=30)
    clock, _, sched, _ = make_scheduler(jobs_mib=5000, jobs_nodes=1, config=cfg)
    run = sched.submit_workflow(pmssm())

    def dispatch(ev):
        if isinstance(ev.payload, ScheduleTick):
            sched.schedule_tick()

    clock.run_until(1000, dispatch)
    assert run.state is RunState.FAILED
    assert run.failure_reason == SCHEDULING_TIMEOUT
    assert run.run_id not in sched.queue
    assert 300 < run.finished_at - run.submitted_at <= 330


def test_empty_queue_tick_is_noop():
    clock, _, sched, _ = make_scheduler()
    assert sched.schedule_tick() == []
    assert not clock.pending


@pytest.mark.parametrize("field, value", [
    ("max_concurrent_workflows", 0), ("memory_headroom_fraction", 0.0),
    ("memory_headroom_fraction", 1.5), ("retry_interval_seconds", 0), ("max_queue_seconds", -1)])
def test_config_validation(field, value):
    with pytest.raises(ValidationError):
        SchedulerConfig(**{field: value})


@given(
    seed=st.integers(0, 2**32),
    max_concurrent=st.integers(1, 8),
    batch=st.integers(1, 12),
    retry=st.sampled_from([7.0, 30.0, 45.0]),
    max_queue=st.sampled_from([60.0, 200.0, 500.0]),
    interval=st.sampled_from([100.0, 250.0]),
)
@settings(max_examples=25, deadline=None)
def test_scheduler_invariants_hold_in_simulation(seed, max_concurrent, batch, retry, max_queue, interval):
    rnd = random.Random(seed)
    spec = pmssm(ntuple_s=rnd.uniform(20, 200), fit_s=rnd.uniform(10, 100))
    cfg = make_config(spec, jobs_nodes=1, batch_size=batch, interval=interval, batches=4,
                      retry=retry, max_queue=max_queue, max_concurrent=max_concurrent,
                      horizon=4 * interval + max_queue + 2000)
    sim = Simulation(cfg, record_trace=False)
    live_max = []

    original = sim.scheduler.schedule_tick

    def tick():
        free = sim.cluster.free_resources("jobs")[1]
        accepted = original()
        # every acceptance respected the headroom against the tick's snapshot
        assert len(accepted) * 6256 <= 0.9 * free or not accepted
        live_max.append(sim.scheduler.live_count)
        return accepted

    sim.scheduler.schedule_tick = tick
    sim._handlers[ScheduleTick] = lambda p: sim.scheduler.schedule_tick()
    result = sim.run()
    assert max(live_max) <= max_concurrent
    for run in result.runs:
        assert run.state in (RunState.FINISHED, RunState.FAILED)
        if run.state is RunState.FAILED:
            assert run.failure_reason == SCHEDULING_TIMEOUT
            age = run.finished_at - run.submitted_at
            assert max_queue < age <= max_queue + retry
            decision = run.finished_at
        else:
            assert run.submitted_at <= run.accepted_at <= run.finished_at
            assert run.accepted_at - run.submitted_at <= max_queue + retry
            decision = run.accepted_at
        assert run.retry_count * retry <= (decision - run.submitted_at) + retry
    # FIFO among runs accepted at the same instant
    by_time = {}
    for run in result.runs:
        if run.accepted_at is not None:
            by_time.setdefault(run.accepted_at, []).append(run.run_id)
    for ids in by_time.values():
        assert ids == sorted(ids)
