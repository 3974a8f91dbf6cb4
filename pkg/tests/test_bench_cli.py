import csv
import pytest
import yaml

from workflow_sim.cli import main, run_scenario
from workflow_sim.errors import SpecSyntaxError, ValidationError
from workflow_sim.metrics import Verdict
from workflow_sim.report import EVENTS_HEADER, PODS_HEADER, RUNS_HEADER, UTILIZATION_HEADER
from workflow_sim.scenario import load_scenario, parse_scenario
from workflow_sim.sim_clock import Clock, LoadBatch
from workflow_sim.simulation import Simulation, generate_load

from conftest import SCENARIOS, make_config, pmssm

A_PATH = SCENARIOS / "scenario_a_448_cores.yaml"


def scenario_doc(**overrides):
    doc = yaml.safe_load(A_PATH.read_text())
    doc["load"]["workflow_spec"] = yaml.safe_load((SCENARIOS / "pmssm_workflow.yaml").read_text())
    for path, value in overrides.items():
        node = doc
        keys = path.split(".")
        for k in keys[:-1]:
            node = node[k]
        node[keys[-1]] = value
    return doc


def test_parse_scenario_a(scenario_a):
    assert scenario_a.pool("jobs").node_count == 56
    assert scenario_a.pool_cores("jobs") == 448_000
    assert scenario_a.pool("jobs").memory_mib_per_node == 16384
    assert scenario_a.load.batch_size == 200
    assert scenario_a.load.interval_seconds == 600
    assert scenario_a.load.batch_count == 6
    assert scenario_a.load.workflow == pmssm()
    assert scenario_a.saturation_window == (1200, 3000)


def test_inline_workflow_spec():
    cfg = parse_scenario(yaml.safe_dump(scenario_doc()))
    assert cfg.load.workflow == pmssm()


@pytest.mark.parametrize("path, value, where", [
    ("load.batch_size", 0, "load.batch_size"),
    ("horizon_seconds", 3000, "horizon_seconds"),
    ("seed", -1, "seed"),
    ("scheduler.memory_headroom_fraction", 0, "scheduler.memory_headroom_fraction"),
])
def test_invalid_fields_name_their_path(path, value, where):
    with pytest.raises(ValidationError) as err:
        parse_scenario(yaml.safe_dump(scenario_doc(**{path: value})))
    assert err.value.where == where


def test_pool_errors():
    doc = scenario_doc()
    doc["cluster"]["pools"] = doc["cluster"]["pools"][:1]
    with pytest.raises(ValidationError):
        parse_scenario(yaml.safe_dump(doc))
    doc = scenario_doc()
    doc["cluster"]["pools"][0]["name"] = "gpu"
    with pytest.raises(ValidationError):
        parse_scenario(yaml.safe_dump(doc))


def test_malformed_scenario():
    with pytest.raises(SpecSyntaxError):
        parse_scenario("cluster: {pools: [")


@pytest.mark.parametrize("batches, size, expected_times", [
    (6, 200, [0, 600, 1200, 1800, 2400, 3000]),
    (1, 1, [0]),
    (36, 200, [600 * k for k in range(36)]),
])
def test_generate_load(batches, size, expected_times):
    cfg = make_config(pmssm(), batch_size=size, batches=batches)
    clock = Clock()
    assert generate_load(cfg, clock) == batches
    events = sorted(clock.pending, key=lambda e: (e.fire_at, e.seq))
    assert [e.fire_at for e in events] == expected_times
    assert [e.payload for e in events] == [LoadBatch(k + 1) for k in range(batches)]
    assert cfg.load.total_submissions == batches * size


def test_long_load_spans_six_hours():
    cfg = make_config(pmssm(), batch_size=200, batches=36)
    assert cfg.load.total_submissions == 7200
    assert 35 * cfg.load.interval_seconds < 6 * 3600 <= 36 * cfg.load.interval_seconds


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture(scope="module")
def scenario_b_outputs(tmp_path_factory):
    out = tmp_path_factory.mktemp("b")
    code = main(["simulate", "--scenario", str(SCENARIOS / "scenario_b_1072_cores.yaml"), "--out", str(out)])
    return code, out


def test_simulate_writes_fixed_layout(scenario_b_outputs):
    code, out = scenario_b_outputs
    assert code == 0
    assert sorted(p.name for p in out.iterdir()) == ["events.csv", "pods.csv", "runs.csv",
                                                    "summary.txt", "utilization.csv"]
    assert read_csv(out / "runs.csv")[0] == RUNS_HEADER
    assert read_csv(out / "pods.csv")[0] == PODS_HEADER
    assert read_csv(out / "utilization.csv")[0] == UTILIZATION_HEADER
    assert read_csv(out / "events.csv")[0] == EVENTS_HEADER


def test_exports_are_consistent(scenario_b_outputs):
    _, out = scenario_b_outputs
    summary = yaml.safe_load((out / "summary.txt").read_text())
    runs = read_csv(out / "runs.csv")[1:]
    assert len(runs) == summary["submissions"] == 200 * 6
    assert summary["verdict"] == "Sustainable" and summary["exit_code"] == 0
    horizon = 4800
    for path in ("runs.csv", "pods.csv", "utilization.csv", "events.csv"):
        rows = read_csv(out / path)
        header = rows[0]
        cols = [i for i, h in enumerate(header) if h.endswith("_s")]
        for row in rows[1:]:
            for i in cols:
                if row[i]:
                    assert 0 <= float(row[i]) <= horizon
    # waits in the summary are recomputable from runs.csv
    by_batch = {}
    for i, row in enumerate(runs):
        wait = float(row[2]) - float(row[1])
        by_batch.setdefault(i // 200 + 1, []).append(wait)
    for b in summary["batches"]:
        waits = sorted(by_batch[b["batch"]])
        assert b["median_wait_s"] == pytest.approx((waits[99] + waits[100]) / 2)


def test_validate_and_capacity_commands(capsys):
    assert main(["validate", "--scenario", str(A_PATH)]) == 0
    assert "1200 submissions" in capsys.readouterr().out
    assert main(["capacity", "--scenario", str(A_PATH)]) == 0
    out = capsys.readouterr().out
    assert out.strip() == "required_core_capacity_millicores: 460333.333"


def test_bad_scenario_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(yaml.safe_dump(scenario_doc(**{"load.batch_size": 0})))
    assert main(["validate", "--scenario", str(bad)]) == 1
    assert main(["simulate", "--scenario", str(tmp_path / "missing.yaml"), "--out", str(tmp_path)]) == 1


def test_failed_runs_exit_4(tmp_path):
    code, result = run_scenario(load_scenario(SCENARIOS / "scenario_failure_2_nodes.yaml"), tmp_path)
    assert code == 4 and result.failed_runs


def test_seed_override_changes_uniform_trace(tmp_path):
    from workflow_sim.workflow_model import DurationModel, StepSpec, WorkflowSpec

    spec = WorkflowSpec("u", (StepSpec("a", (), 1000, 1000, DurationModel.uniform(10, 50)),
                              StepSpec("b", ("a",), 1000, 1000, DurationModel.uniform(10, 50))))
    cfg = make_config(spec, batch_size=5, batches=4, interval=100)
    first = Simulation(cfg, seed=1)
    first.run()
    again = Simulation(cfg, seed=1)
    again.run()
    other = Simulation(cfg, seed=2)
    other.run()
    assert first.trace == again.trace
    assert first.trace != other.trace
    assert other.config.seed == 2


def test_exit_code_agrees_with_verdict(scenario_a, tmp_path):
    code, result = run_scenario(scenario_a, tmp_path)
    assert result.verdict is Verdict.OVERLOADED and code == 3
    summary = yaml.safe_load((tmp_path / "summary.txt").read_text())
    assert summary["verdict"] == "Overloaded" and summary["exit_code"] == 3
