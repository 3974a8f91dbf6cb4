"""Command-line entry point: ``workflow-sim simulate|validate|capacity``."""

from __future__ import annotations

import argparse
import logging
import sys

from .cluster import JOBS_POOL
from .errors import SimError
from .metrics import SUSTAINABLE_SIZING_FACTOR, required_core_capacity
from .report import format_summary, write_outputs
from .scenario import load_scenario
from .simulation import Simulation

log = logging.getLogger("workflow_sim")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_OVERLOADED = 3
EXIT_FAILED_RUNS = 4


def run_scenario(config, out_dir, seed=None):
    """Simulate ``config`` to its horizon, write all artifacts, return (exit code, result)."""
    sim = Simulation(config, seed=seed)
    result = sim.run()
    write_outputs(out_dir, sim, result)
    return result.exit_code, result


def _simulate(args):
    config = load_scenario(args.scenario)
    code, result = run_scenario(config, args.out, seed=args.seed)
    sys.stdout.write(format_summary(result))
    return code


def _validate(args):
    config = load_scenario(args.scenario)
    print(f"{config.name}: ok ({config.load.total_submissions} submissions, "
          f"{len(config.load.workflow.steps)} steps per workflow)")
    return EXIT_OK


def _capacity(args):
    config = load_scenario(args.scenario)
    required = required_core_capacity(config.load.workflow, config.load.arrival_rate,
                                      config.bind_delay_seconds)
    print(f"required_core_capacity_millicores: {required:.3f}")
    if args.verbose:
        supplied = config.pool_cores(JOBS_POOL)
        print(f"jobs_pool_millicores: {supplied}")
        print(f"sizing_guidance_millicores: {SUSTAINABLE_SIZING_FACTOR * required:.3f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="workflow-sim", description=__doc__)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write CSVs plus summary.txt")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("validate", help="parse and validate a scenario")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=_validate)

    p = sub.add_parser("capacity", help="print the steady-state core demand of a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=_capacity)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SimError, OSError) as exc:
        log.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
