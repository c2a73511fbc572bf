"""
Experiment plans: the cross product of algorithms, disciplines, V values,
prediction windows and seeds, run on a bounded process pool and written out
as plot-ready CSV plus JSON.
"""

import itertools
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import pandas as pd
import yaml
from pydantic import BaseModel, ValidationError, model_validator

from .analysis import RunReport, build_report, pmf_frame, summarize_sweep, write_csv
from .engine import RunResult, run
from .exceptions import ArtifactIOError, ConfigError, InfeasibleError, PreqsimError
from .oracle import GammaStar, PolicySolution, solve_gamma_star, solve_min_cost
from .presets import get_preset, log_assumptions
from .scenario import Scenario, load_scenario
from .scheduler import Algorithm, Discipline
from .utils.config import sim_config
from .utils.logger import sim_logger


class ExperimentPlan(BaseModel):
    scenario: Optional[str] = None
    preset: Optional[str] = None
    algorithms: List[Algorithm] = [Algorithm.PBP]
    disciplines: List[Discipline] = [Discipline.FIFO]
    V: List[float] = [10.0]
    D: Optional[List[List[int]]] = None
    rho: Optional[List[float]] = None
    rho_base: Optional[List[int]] = None
    seeds: List[int] = [1]
    horizon: Optional[int] = None
    output_dir: Optional[str] = None
    twin_system: bool = False
    # twin counter checks are off in sweeps unless asked for
    twin_check: bool = False
    packet_log: bool = False
    trace: bool = False
    oracle: bool = True

    @model_validator(mode="after")
    def check_plan(self) -> "ExperimentPlan":
        if (self.scenario is None) == (self.preset is None):
            raise ValueError("give exactly one of scenario and preset")
        if self.D is not None and self.rho is not None:
            raise ValueError("give at most one of D and rho")
        for name in ("algorithms", "disciplines", "V", "seeds"):
            if not getattr(self, name):
                raise ValueError(f"{name} must not be empty")
        if any(v < 0 for v in self.V):
            raise ValueError("V values must be non-negative")
        if self.rho is not None and any(r < 0 for r in self.rho):
            raise ValueError("rho values must be non-negative")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        return self


@dataclass(frozen=True)
class RunJob:
    scenario: Scenario
    algorithm: Algorithm
    discipline: Discipline
    V: float
    seed: int
    horizon: int
    twin_system: bool
    check_twin: bool
    packet_log: bool
    trace: bool
    solution: Optional[PolicySolution] = None
    gamma: Optional[GammaStar] = None


@dataclass
class JobOutput:
    report: RunReport
    packets: Optional[pd.DataFrame] = None
    trace: Optional[pd.DataFrame] = None


def load_plan(path: Union[str, Path]) -> ExperimentPlan:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"plan file {path} not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = yaml.safe_load(f) if path.suffix in (".yml", ".yaml") else json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    return plan_from_dict(raw or {})


def plan_from_dict(raw: Dict[str, Any]) -> ExperimentPlan:
    try:
        return ExperimentPlan.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"]) or "plan"
        raise ConfigError(first["msg"].removeprefix("Value error, "), path=path)


def resolve_scenario(plan: ExperimentPlan) -> Scenario:
    if plan.scenario is not None:
        return load_scenario(plan.scenario)
    return get_preset(plan.preset)


def prediction_windows(plan: ExperimentPlan, scenario: Scenario) -> List[Tuple[int, ...]]:
    """D lists as given, or rho times the base windows (the scenario's own by default)"""
    if plan.D is not None:
        for i, d in enumerate(plan.D):
            if len(d) != scenario.n_users or any(x < 0 for x in d):
                raise ConfigError(f"expected {scenario.n_users} non-negative windows",
                                  path=f"D.{i}")
        return [tuple(d) for d in plan.D]
    if plan.rho is not None:
        base = plan.rho_base or list(scenario.prediction)
        if len(base) != scenario.n_users:
            raise ConfigError(f"expected {scenario.n_users} base windows", path="rho_base")
        return [tuple(int(round(r * b)) for b in base) for r in plan.rho]
    return [tuple(scenario.prediction)]


def enumerate_jobs(
    plan: ExperimentPlan,
    scenario: Scenario,
    solution: Optional[PolicySolution] = None,
    gammas: Optional[Dict[float, GammaStar]] = None,
) -> List[RunJob]:
    """Deterministic order: algorithm, discipline, V, D, seed"""
    horizon = plan.horizon or sim_config.get_config().simulation.horizon
    gammas = gammas or {}
    jobs = []
    for algorithm, discipline, V, D, seed in itertools.product(
        plan.algorithms, plan.disciplines, plan.V, prediction_windows(plan, scenario), plan.seeds
    ):
        jobs.append(
            RunJob(
                scenario=scenario.with_prediction(D),
                algorithm=algorithm,
                discipline=discipline,
                V=V,
                seed=seed,
                horizon=horizon,
                twin_system=plan.twin_system and algorithm == Algorithm.BP,
                check_twin=plan.twin_check,
                packet_log=plan.packet_log,
                trace=plan.trace,
                solution=solution,
                gamma=gammas.get(V),
            )
        )
    return jobs


def packets_frame(result: RunResult) -> pd.DataFrame:
    data = result.packet_log.arrays()
    return pd.DataFrame(
        data, columns=["user", "arrival_slot", "served_slot", "count", "from_actual", "delay"]
    )


def trace_frame(result: RunResult) -> pd.DataFrame:
    rows = []
    for slot in result.slot_logs or []:
        row: Dict[str, Any] = {
            "slot": slot.slot,
            "state": " ".join(f"{s:g}" for s in slot.state),
            "action": " ".join(f"{p:g}" for p in slot.action),
            "cost": slot.cost,
        }
        for n in range(len(slot.q_sum)):
            row[f"q_sum_{n + 1}"] = slot.q_sum[n]
            row[f"q_actual_{n + 1}"] = slot.q_actual[n]
            row[f"q_hat_{n + 1}"] = slot.q_hat[n]
            row[f"rates_{n + 1}"] = " ".join(str(r) for r in slot.rates[n])
        rows.append(row)
    return pd.DataFrame(rows)


def execute(job: RunJob) -> JobOutput:
    """Run one job and build its report; safe to call in a worker process"""
    result = run(
        job.scenario,
        job.algorithm,
        job.discipline,
        job.V,
        job.horizon,
        job.seed,
        check_twin=job.check_twin,
        twin_system=job.twin_system,
        trace=job.trace,
    )
    report = build_report(result, job.scenario, job.solution, job.gamma)
    return JobOutput(
        report=report,
        packets=packets_frame(result) if job.packet_log else None,
        trace=trace_frame(result) if job.trace else None,
    )


def worker_count(threads: Optional[int] = None) -> int:
    if threads is not None:
        return max(1, threads)
    return sim_config.get_config().runner.threads


def execute_all(jobs: List[RunJob], threads: Optional[int] = None) -> List[JobOutput]:
    """Results come back in job order whatever the pool size"""
    workers = min(worker_count(threads), max(1, len(jobs)))
    if workers == 1:
        return [execute(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(execute, jobs))


def solve_oracle(
    scenario: Scenario, V_values: List[float]
) -> Tuple[Optional[PolicySolution], Dict[float, GammaStar]]:
    """Oracle columns for a sweep; an infeasible scenario still runs, without them"""
    try:
        solution = solve_min_cost(scenario)
    except InfeasibleError as e:
        sim_logger.warning(f"no oracle columns: {e.detail}")
        return None, {}
    gammas: Dict[float, GammaStar] = {}
    if solution.max_slack > 0:
        for V in V_values:
            if V > 0:
                try:
                    gammas[V] = solve_gamma_star(scenario, V, solution)
                except PreqsimError as e:
                    sim_logger.warning(f"gamma* unavailable for V={V:g}: {e.detail}")
    return solution, gammas


def write_outputs(
    outputs: List[JobOutput],
    output_dir: Union[str, Path],
    plan: Optional[ExperimentPlan] = None,
    solution: Optional[PolicySolution] = None,
    scenario: Optional[Scenario] = None,
) -> Path:
    """
    sweep.csv, summary.json and runs/<run_id>/{report.json, pmf.csv, packets.csv,
    trace.csv}. Only summary.json carries wall-clock data.
    """
    out = Path(output_dir)
    try:
        (out / "runs").mkdir(parents=True, exist_ok=True)
        for output in outputs:
            report = output.report
            run_dir = out / "runs" / report.run_id
            run_dir.mkdir(parents=True, exist_ok=True)
            (run_dir / "report.json").write_text(
                report.model_dump_json(indent=2, exclude={"elapsed_s"}), encoding="utf-8"
            )
            write_csv(pmf_frame(report.pmfs), run_dir / "pmf.csv")
            if output.packets is not None:
                write_csv(output.packets, run_dir / "packets.csv")
            if output.trace is not None:
                write_csv(output.trace, run_dir / "trace.csv")

        reports = [o.report for o in outputs]
        write_csv(summarize_sweep(reports), out / "sweep.csv")
        summary = {
            "created": datetime.now(timezone.utc).isoformat(),
            "runs": [
                {"run_id": r.run_id, "elapsed_s": r.elapsed_s, "f_av": r.f_av,
                 "q_sum_av": r.q_sum_av}
                for r in reports
            ],
            "plan": plan.model_dump(mode="json") if plan is not None else None,
            "scenario": {
                "name": scenario.name,
                "log_base": scenario.log_base,
                "notes": list(scenario.notes),
            } if scenario is not None else None,
            "oracle": solution.to_dict() if solution is not None else None,
        }
        (out / "summary.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    except OSError as e:
        raise ArtifactIOError(f"cannot write results to {out}: {e}")
    sim_logger.info(f"Wrote {len(outputs)} runs to {out}")
    return out


def run_plan(plan: ExperimentPlan, threads: Optional[int] = None) -> Tuple[List[RunReport], Path]:
    scenario = resolve_scenario(plan)
    log_assumptions(scenario)
    solution, gammas = solve_oracle(scenario, plan.V) if plan.oracle else (None, {})
    jobs = enumerate_jobs(plan, scenario, solution, gammas)
    sim_logger.info(f"Plan for '{scenario.name}': {len(jobs)} runs on "
                    f"{min(worker_count(threads), len(jobs))} workers")
    outputs = execute_all(jobs, threads)
    output_dir = plan.output_dir or sim_config.get_config().runner.output_dir
    path = write_outputs(outputs, output_dir, plan, solution, scenario)
    return [o.report for o in outputs], path


def load_reports(output_dir: Union[str, Path]) -> List[RunReport]:
    """Reports of every run directory under output_dir, sorted by run id"""
    runs = Path(output_dir) / "runs"
    files = sorted(runs.glob("*/report.json"))
    if not files:
        raise ArtifactIOError(f"no run reports under {runs}")
    reports = []
    for path in files:
        try:
            reports.append(RunReport.model_validate_json(path.read_text(encoding="utf-8")))
        except OSError as e:
            raise ArtifactIOError(f"cannot read {path}: {e}")
        except ValidationError as e:
            raise ArtifactIOError(f"{path} is not a run report: {e.errors()[0]['msg']}")
    return reports
