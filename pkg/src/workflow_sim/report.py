"""CSV exports and the plain-text summary report."""

from __future__ import annotations

import csv
from pathlib import Path

import yaml

from .cluster import JOBS_POOL
from .sim_clock import format_time

RUNS_HEADER = ["run_id", "submitted_at_s", "accepted_at_s", "finished_at_s", "state",
               "retry_count", "failure_reason"]
PODS_HEADER = ["pod_id", "run_id", "kind", "step_id", "created_at_s", "bound_at_s",
               "started_at_s", "finished_at_s", "deleted_at_s", "node_id"]
UTILIZATION_HEADER = ["time_s", "pool", "node_id", "alloc_millicores", "capacity_millicores",
                      "fraction"]
EVENTS_HEADER = ["seq", "time_s", "type", "details"]


def _t(value):
    return "" if value is None else format_time(value)


def write_runs(path, runs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUNS_HEADER)
        for r in runs:
            w.writerow([r.run_id, _t(r.submitted_at), _t(r.accepted_at), _t(r.finished_at),
                        r.state.value, r.retry_count, r.failure_reason or ""])


def write_pods(path, pods):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PODS_HEADER)
        for p in pods:
            w.writerow([p.id, p.run_id, p.kind, p.step_id, _t(p.created_at), _t(p.bound_at),
                        _t(p.started_at), _t(p.finished_at), _t(p.deleted_at), p.placed_on or ""])


def write_utilization(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(UTILIZATION_HEADER)
        for t, pool, node_id, alloc, cap in rows:
            w.writerow([format_time(t), pool, node_id, alloc, cap, f"{alloc / cap:.6f}"])


def write_events(path, trace_lines):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(EVENTS_HEADER) + "\n")
        for line in trace_lines:
            fh.write(line + "\n")


def summary_dict(result) -> dict:
    cfg = result.config
    lo, hi = cfg.saturation_window
    return {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "verdict": result.verdict.value,
        "exit_code": result.exit_code,
        "submissions": len(result.runs),
        "failed_runs": len(result.failed_runs),
        "jobs_pool_millicores": cfg.pool_cores(JOBS_POOL),
        "required_core_capacity_millicores": round(result.required_millicores, 3),
        "saturation_window_s": [lo, hi],
        "saturation_utilization": round(result.saturation_utilization, 6),
        "littles_law_error": None if result.littles_error is None else round(result.littles_error, 6),
        "batches": [
            {"batch": b, "median_wait_s": round(m, 6), "p95_wait_s": round(p, 6)}
            for b, m, p in result.series
        ],
    }


def format_summary(result) -> str:
    return yaml.safe_dump(summary_dict(result), sort_keys=False, default_flow_style=None)


def write_outputs(out_dir, sim, result) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_runs(out / "runs.csv", result.runs)
    write_pods(out / "pods.csv", sim.cluster.pods.values())
    write_utilization(out / "utilization.csv", sim.utilization_rows)
    write_events(out / "events.csv", sim.trace)
    (out / "summary.txt").write_text(format_summary(result))
    return out
