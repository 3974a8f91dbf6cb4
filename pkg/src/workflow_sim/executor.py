"""Workflow execution and termination.

Each accepted run gets an orchestrator pod; once it is running, job pods are
created for steps whose dependencies have all succeeded. Job status flows
through an in-process message queue. The workflow-finished message is
consumed ``termination_latency_seconds`` after it is published, at which
point the run's pods are closed and the run record is persisted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import Cluster, Pod, PodState
from .errors import (
    DuplicateCompletion,
    InconsistentState,
    RequestExceedsLargestNode,
    UnknownStep,
    ValidationError,
)
from .scheduler import UNSCHEDULABLE_POD, RunState, RunStore, Scheduler, WorkflowRun
from .sim_clock import Clock, JobCompleted, StatusMessage, TerminationProcessed
from .workflow_model import ready_steps

JOB_SUCCEEDED = "job-succeeded"
WORKFLOW_FINISHED = "workflow-finished"


@dataclass(frozen=True)
class ExecutorConfig:
    termination_latency_seconds: float = 5.0

    def __post_init__(self):
        if self.termination_latency_seconds < 0:
            raise ValidationError("must be >= 0", "executor.termination_latency_seconds")


@dataclass
class RunExecutionState:
    run_id: str
    orchestrator_pod: str | None = None
    dispatched: set = field(default_factory=set)
    completed: set = field(default_factory=set)
    job_pods: dict = field(default_factory=dict)
    dispatch_log: list = field(default_factory=list)  # (time, step_id) in dispatch order


class MessageQueue:
    """Status messages published by the watching loop, consumed later as events."""

    def __init__(self, clock: Clock):
        self.clock = clock
        self.emitted = 0
        self.consumed = 0

    def publish(self, message, delay: float = 0.0) -> None:
        self.emitted += 1
        self.clock.schedule(delay, message)

    def consume(self, message) -> None:
        if message.emitted_at > self.clock.now:
            raise InconsistentState("message consumed before it was emitted")
        self.consumed += 1


class Executor:
    def __init__(self, clock: Clock, cluster: Cluster, scheduler: Scheduler, rng,
                 config: ExecutorConfig | None = None, store: RunStore | None = None):
        self.clock = clock
        self.cluster = cluster
        self.scheduler = scheduler
        self.rng = rng
        self.config = config or ExecutorConfig()
        self.store = store if store is not None else scheduler.store
        self.messages = MessageQueue(clock)
        self.states: dict[str, RunExecutionState] = {}
        self.sampled_durations: dict[tuple[str, str], float] = {}

    # -- start ---------------------------------------------------------------

    def start_workflow(self, run: WorkflowRun) -> RunExecutionState | None:
        if run.state is not RunState.RUNNING:
            raise InconsistentState(f"start_workflow on {run.state.value} run {run.run_id}")
        state = RunExecutionState(run.run_id)
        self.states[run.run_id] = state
        spec = run.spec
        try:
            pod = self.cluster.create_pod(run.run_id, "orchestrator",
                                          spec.orchestrator_cores,
                                          spec.orchestrator_memory_mib)
        except RequestExceedsLargestNode:
            self._fail(run, state)
            return None
        state.orchestrator_pod = pod.id
        return state

    def on_pod_started(self, pod: Pod) -> None:
        self.cluster.start_pod(pod)
        run = self.scheduler.runs[pod.run_id]
        state = self.states[pod.run_id]
        if pod.kind == "orchestrator":
            self._dispatch(run, state, ready_steps(run.spec, state.completed, state.dispatched))
            return
        duration = run.spec.step(pod.step_id).duration.sample(self.rng)
        self.sampled_durations[(run.run_id, pod.step_id)] = duration
        self.clock.schedule(duration, JobCompleted(pod.id, run.run_id, pod.step_id))

    def _dispatch(self, run: WorkflowRun, state: RunExecutionState, step_ids) -> list[str]:
        dispatched = []
        for sid in sorted(step_ids):
            step = run.spec.step(sid)
            try:
                pod = self.cluster.create_pod(run.run_id, "job", step.cores, step.memory_mib, sid)
            except RequestExceedsLargestNode:
                self._fail(run, state)
                return dispatched
            state.dispatched.add(sid)
            state.job_pods[sid] = pod.id
            state.dispatch_log.append((self.clock.now, sid))
            dispatched.append(sid)
        return dispatched

    # -- watching loop -------------------------------------------------------

    def on_job_completed(self, state: RunExecutionState, step_id: str) -> list[str]:
        run = self.scheduler.runs[state.run_id]
        if step_id not in run.spec:
            raise UnknownStep(f"run {run.run_id} has no step {step_id!r}")
        if step_id in state.completed:
            raise DuplicateCompletion(f"step {step_id!r} of run {run.run_id} completed twice")
        if step_id not in state.dispatched:
            raise InconsistentState(f"step {step_id!r} of run {run.run_id} was never dispatched")
        pod = self.cluster.pods[state.job_pods[step_id]]
        self.cluster.mark_succeeded(pod)
        # A finished job no longer holds its node share; only the orchestrator
        # stays allocated until termination.
        self.cluster.release_pod(pod)
        now = self.clock.now
        self.messages.publish(StatusMessage(run.run_id, JOB_SUCCEEDED, step_id, now))
        state.completed.add(step_id)
        if run.state is not RunState.RUNNING:
            return []
        new = self._dispatch(run, state, ready_steps(run.spec, state.completed, state.dispatched))
        if len(state.completed) == len(run.spec.steps):
            self.messages.publish(
                StatusMessage(run.run_id, WORKFLOW_FINISHED, "", now),
                delay=self.config.termination_latency_seconds,
            )
        return new

    def on_status_message(self, message: StatusMessage) -> None:
        self.messages.consume(message)
        if message.kind == WORKFLOW_FINISHED:
            run = self.scheduler.runs[message.run_id]
            self.process_termination(run, self.states.get(run.run_id))
            self.clock.schedule(0.0, TerminationProcessed(run.run_id, message.emitted_at))

    # -- termination ---------------------------------------------------------

    def process_termination(self, run: WorkflowRun, state: RunExecutionState | None) -> None:
        if run.state is not RunState.RUNNING or state is None:
            raise InconsistentState(f"termination for {run.state.value} run {run.run_id}")
        orchestrator = self.cluster.pods[state.orchestrator_pod]
        if orchestrator.state is PodState.RUNNING:
            self.cluster.mark_succeeded(orchestrator)
        self._release_all(state)
        run.transition(RunState.FINISHED)
        run.finished_at = self.clock.now
        self.store.persist(run)
        self.scheduler.run_left(run)

    def _release_all(self, state: RunExecutionState) -> None:
        pod_ids = list(state.job_pods.values())
        if state.orchestrator_pod is not None:
            pod_ids.append(state.orchestrator_pod)
        for pid in pod_ids:
            pod = self.cluster.pods[pid]
            if pod.state is not PodState.DELETED:
                self.cluster.release_pod(pod)

    def _fail(self, run: WorkflowRun, state: RunExecutionState) -> None:
        self._release_all(state)
        run.transition(RunState.FAILED)
        run.failure_reason = UNSCHEDULABLE_POD
        run.finished_at = self.clock.now
        self.store.persist(run)
        self.scheduler.run_left(run)
