"""Discrete-event model of a containerised workflow platform on a Kubernetes-style cluster.

Workflows are submitted in bursts, admitted against concurrency and free-memory
limits, executed as DAGs of pods on a simulated node pool, and terminated
asynchronously. The benchmark harness reproduces overload and sustainable
regimes and reports wait-time, utilization and capacity statistics.
"""

from .cluster import Cluster, Node, Pod, PodState, PoolConfig, UtilizationSample
from .executor import Executor, ExecutorConfig, RunExecutionState
from .metrics import (
    RunMetrics,
    Verdict,
    batch_wait_series,
    detect_overflow,
    littles_law_check,
    required_core_capacity,
)
from .scenario import ScenarioConfig, load_scenario, parse_scenario
from .scheduler import Accept, Defer, RunState, Scheduler, SchedulerConfig, WorkflowRun, admission_check
from .sim_clock import Clock, Event
from .simulation import Simulation, SimulationResult, generate_load
from .workflow_model import (
    DurationModel,
    StepSpec,
    WorkflowSpec,
    parse_workflow_spec,
    peak_parallel_demand,
    ready_steps,
    topological_order,
)

__version__ = "0.1.0"
