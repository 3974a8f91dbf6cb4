from pathlib import Path

import pytest

from workflow_sim.cluster import PoolConfig
from workflow_sim.executor import ExecutorConfig
from workflow_sim.scenario import LoadConfig, ScenarioConfig, load_scenario
from workflow_sim.scheduler import SchedulerConfig
from workflow_sim.workflow_model import DurationModel, StepSpec, WorkflowSpec

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

NODE_MC = 8000
NODE_MIB = 16384


def step(sid, deps=(), cores=1000, mem=1000, seconds=10.0):
    return StepSpec(sid, tuple(deps), cores, mem, DurationModel.fixed(seconds))


def pmssm(ntuple_mc=1000, ntuple_mib=2000, fit_mib=4000, ntuple_s=360.0, fit_s=240.0):
    ntuples = [step(f"ntuple-{i}", (), ntuple_mc, ntuple_mib, ntuple_s) for i in (1, 2, 3)]
    fit = step("fit", [s.id for s in ntuples], 1000, fit_mib, fit_s)
    return WorkflowSpec("pmssm", tuple(ntuples) + (fit,), 100, 256)


def make_config(workflow, jobs_nodes=2, orch_nodes=1, batch_size=1, interval=600.0, batches=1,
                horizon=None, bind_delay=5.0, retry=30.0, max_queue=7200.0, headroom=0.9,
                max_concurrent=10000, termination=5.0, seed=0, node_mc=NODE_MC, node_mib=NODE_MIB):
    horizon = horizon if horizon is not None else interval * batches + 7200
    n = batches
    return ScenarioConfig(
        name="test",
        seed=seed,
        pools=(PoolConfig("orchestration", orch_nodes, node_mc, node_mib),
               PoolConfig("jobs", jobs_nodes, node_mc, node_mib)),
        bind_delay_seconds=bind_delay,
        scheduler=SchedulerConfig(max_concurrent, headroom, retry, max_queue),
        executor=ExecutorConfig(termination),
        load=LoadConfig(workflow, batch_size, interval, batches),
        horizon_seconds=horizon,
        saturation_window=(0.0, interval * n),
        steady_window=(interval, interval * n) if n >= 2 else (0.0, horizon),
    )


@pytest.fixture
def pmssm_spec():
    return pmssm()


@pytest.fixture(scope="session")
def scenario_a():
    return load_scenario(SCENARIOS / "scenario_a_448_cores.yaml")


@pytest.fixture(scope="session")
def scenario_b():
    return load_scenario(SCENARIOS / "scenario_b_1072_cores.yaml")
