"""Command-line entry point: run, sweep, verify, oracle and report."""

import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

from .analysis import summarize_sweep, write_csv
from .exceptions import AnalysisError, ConfigError, PreqsimError
from .oracle import backlog_bound, drift_constant, solve_gamma_star, solve_min_cost
from .presets import LIFO_ZERO_DELAY_REFERENCE, get_preset, log_assumptions
from .runner import load_plan, load_reports, plan_from_dict, run_plan
from .scenario import Scenario, load_scenario
from .utils.config import sim_config
from .utils.logger import sim_logger
from .verify import failures, reference_mismatches, verify_preset, verify_random

DEFAULT_PRESET = "two_user_downlink"


def _list(value: str, cast, name: str) -> list:
    try:
        return [cast(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse '{value}'", path=name)


def _scenario(args) -> Scenario:
    if args.scenario and args.preset:
        raise ConfigError("give either --scenario or --preset", path="scenario")
    if args.scenario:
        return load_scenario(args.scenario)
    return get_preset(_preset_name(args))


def _preset_name(args) -> str:
    return args.preset or DEFAULT_PRESET


def cmd_run(args) -> int:
    raw: Dict = {
        "algorithms": _list(args.algo, str, "algo"),
        "disciplines": _list(args.discipline, str, "discipline"),
        "V": _list(args.V, float, "V"),
        "seeds": _list(args.seed, int, "seed"),
        "horizon": args.T,
        "output_dir": args.out,
        "twin_system": args.twin_system,
        "packet_log": args.packets,
        "trace": args.trace,
        "oracle": not args.no_oracle,
    }
    if args.twin_check:
        raw["twin_check"] = True
    if args.scenario:
        raw["scenario"] = args.scenario
    else:
        raw["preset"] = _preset_name(args)
    if args.D:
        raw["D"] = [_list(d, int, "D") for d in args.D]
    if args.rho:
        raw["rho"] = _list(args.rho, float, "rho")
    plan = plan_from_dict(raw)
    reports, path = run_plan(plan, args.threads)
    print(f"{len(reports)} runs written to {path}")
    return 0


def cmd_sweep(args) -> int:
    plan = load_plan(args.plan)
    if args.out:
        plan.output_dir = args.out
    reports, path = run_plan(plan, args.threads)
    print(f"{len(reports)} runs written to {path}")
    return 0


def cmd_verify(args) -> int:
    if args.random:
        results = verify_random(args.trials, args.T or 10_000, args.seed)
    else:
        scenario = _scenario(args)
        log_assumptions(scenario)
        horizon = args.T or sim_config.get_config().simulation.horizon
        reference = None if args.scenario else LIFO_ZERO_DELAY_REFERENCE.get(_preset_name(args))
        results = verify_preset(scenario, horizon, args.seed, zero_delay_reference=reference)
    failed = failures(results)
    binding = [r for r in results if not r.advisory]
    print(f"{len(binding) - len(failed)}/{len(binding)} checks passed")
    for result in reference_mismatches(results):
        print(f"NOTE {result.name}: {result.detail}")
    for result in failed:
        print(f"FAIL {result.name}: {result.detail}")
    return 2 if failed else 0


def cmd_oracle(args) -> int:
    scenario = _scenario(args)
    log_assumptions(scenario)
    solution = solve_min_cost(scenario)
    output = {
        "scenario": scenario.name,
        "log_base": scenario.log_base,
        "notes": list(scenario.notes),
        "arrival_rates": list(scenario.arrival_rates),
        "policy": solution.to_dict(),
        "drift_constant": drift_constant(scenario),
        "V": {},
    }
    for V in _list(args.V, float, "V"):
        entry: Dict = {"q_bound": backlog_bound(scenario, V, solution.max_slack)}
        try:
            entry.update(solve_gamma_star(scenario, V, solution).to_dict())
        except AnalysisError as e:
            entry["error"] = e.detail
        output["V"][f"{V:g}"] = entry
    print(json.dumps(output, indent=2, default=str))
    return 0


def cmd_report(args) -> int:
    reports = load_reports(args.dir)
    target = Path(args.out) if args.out else Path(args.dir) / "sweep.csv"
    write_csv(summarize_sweep(reports), target)
    print(f"{len(reports)} runs aggregated into {target}")
    return 0


def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", help="Scenario file (JSON or YAML)")
    parser.add_argument("--preset", help="Built-in scenario (default: two_user_downlink)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="preqsim", description="Predictive backpressure queueing simulator"
    )
    parser.add_argument("--log-level", help="Override the configured log level")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="Run the cross product of the given options")
    _add_scenario_args(run_p)
    run_p.add_argument("--algo", default="pbp", help="bp, pbp or a comma list (default: pbp)")
    run_p.add_argument("--discipline", default="fifo", help="fifo, lifo or a comma list")
    run_p.add_argument("--V", default="10", help="Comma list of V values (default: 10)")
    run_p.add_argument("--D", action="append", help="Prediction windows, e.g. 15,30; repeatable")
    run_p.add_argument("--rho", help="Comma list of window scalings of the scenario's windows")
    run_p.add_argument("--seed", default="1", help="Comma list of seeds (default: 1)")
    run_p.add_argument("--T", type=int, help="Horizon in slots (default: from settings)")
    run_p.add_argument("--out", help="Output directory (default: from settings)")
    run_p.add_argument("--threads", type=int, help="Worker processes (default: PREQSIM_THREADS)")
    run_p.add_argument("--twin-system", action="store_true",
                       help="Run BP on the equivalent delayed-arrival system")
    run_p.add_argument("--twin-check", action="store_true",
                       help="Compare Q^sum with the twin counter every slot (slower)")
    run_p.add_argument("--packets", action="store_true", help="Write packets.csv per run")
    run_p.add_argument("--trace", action="store_true", help="Write trace.csv per run")
    run_p.add_argument("--no-oracle", action="store_true", help="Skip the oracle columns")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="Run a plan file")
    sweep_p.add_argument("--plan", required=True, help="Plan file (JSON or YAML)")
    sweep_p.add_argument("--out", help="Override the plan's output directory")
    sweep_p.add_argument("--threads", type=int, help="Worker processes")
    sweep_p.set_defaults(func=cmd_sweep)

    verify_p = sub.add_parser("verify", help="Run the property suite")
    _add_scenario_args(verify_p)
    verify_p.add_argument("--random", action="store_true", help="Random small scenarios")
    verify_p.add_argument("--trials", type=int, default=100, help="Random trials (default: 100)")
    verify_p.add_argument("--T", type=int, help="Horizon in slots")
    verify_p.add_argument("--seed", type=int, default=1, help="Seed (default: 1)")
    verify_p.set_defaults(func=cmd_verify)

    oracle_p = sub.add_parser("oracle", help="Print the min-cost policy and gamma* as JSON")
    _add_scenario_args(oracle_p)
    oracle_p.add_argument("--V", default="10", help="Comma list of V values (default: 10)")
    oracle_p.set_defaults(func=cmd_oracle)

    report_p = sub.add_parser("report", help="Re-aggregate existing run directories")
    report_p.add_argument("dir", help="Output directory of an earlier run or sweep")
    report_p.add_argument("--out", help="Target CSV (default: <dir>/sweep.csv)")
    report_p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        sim_config.get_config()
        if args.log_level:
            sim_logger.set_level(args.log_level)
        return args.func(args)
    except PreqsimError as e:
        sim_logger.error(str(e))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
