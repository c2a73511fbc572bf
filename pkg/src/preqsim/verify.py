"""
Property suite run by `preqsim verify`.

Random mode checks the exact sample-path properties on random small systems.
Preset mode runs the long statistical checks on a built-in scenario.
"""

from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .analysis import (
    RunReport,
    backlog_reduction_gap,
    build_report,
    check_cost_bound,
    empirical_delay_pmf,
    total_variation,
    verify_shift,
    weighted_totals,
)
from .engine import run
from .exceptions import AnalysisError, InfeasibleError, SimulationInvariantError
from .oracle import delay_reduction, shift_distribution, solve_gamma_star, solve_min_cost
from .presets import random_scenario
from .scenario import RngStream, Scenario
from .scheduler import Algorithm, Discipline
from .utils.logger import sim_logger

EXACT_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    advisory: bool = False


def _record(results: List[CheckResult], name: str, passed: bool, detail: str = "",
            advisory: bool = False) -> None:
    sim_logger.log_check(name, passed, detail, advisory)
    results.append(CheckResult(name, passed, detail, advisory))


def check_twin_pair(
    scenario: Scenario, V: float, discipline: Discipline, horizon: int, seed: int, label: str
) -> List[CheckResult]:
    """
    PBP against BP on its equivalent system, same seed: the twin counter,
    full efficiency of every allocation, equal backlog paths, and the exact
    delay shift with its mean-delay reduction.
    """
    results: List[CheckResult] = []
    try:
        pbp = run(scenario, Algorithm.PBP, discipline, V, horizon, seed,
                  check_twin=True, strict=True, burn_in_fraction=0.0)
    except SimulationInvariantError as e:
        _record(results, f"{label} twin counter", False, e.detail)
        return results
    _record(results, f"{label} twin counter", True)

    twin = run(scenario, Algorithm.BP, discipline, V, horizon, seed,
               twin_system=True, strict=True, burn_in_fraction=0.0)
    same_path = bool(np.array_equal(pbp.q_sum, twin.q_sum))
    _record(results, f"{label} backlog paths", same_path,
            "" if same_path else "Q^sum of PBP differs from the equivalent BP queue")

    pmf_pbp = empirical_delay_pmf(pbp.packet_log, scenario.n_users) if len(pbp.packet_log) else None
    pmf_twin = empirical_delay_pmf(twin.packet_log, scenario.n_users) if len(twin.packet_log) else None
    if pmf_pbp is None or pmf_twin is None:
        _record(results, f"{label} delay shift", pmf_pbp is None and pmf_twin is None,
                "no packets")
        return results

    tv = max(
        total_variation(p.probs, shift_distribution(b.probs, d))
        for p, b, d in zip(pmf_pbp, pmf_twin, scenario.prediction)
    )
    _record(results, f"{label} delay shift", tv <= EXACT_TOL, f"TV={tv:.3g}")

    lam = scenario.arrival_rates
    if sum(lam) > 0:
        w_twin, _ = weighted_totals(pmf_twin, lam)
        w_pbp, _ = weighted_totals(pmf_pbp, lam)
        predicted = delay_reduction([b.probs for b in pmf_twin], lam, scenario.prediction)
        gap = abs((w_twin - w_pbp) - predicted)
        _record(results, f"{label} delay reduction", gap <= EXACT_TOL,
                f"measured {w_twin - w_pbp:.6g} vs {predicted:.6g}")
    return results


def verify_random(
    trials: int, horizon: int, seed: int = 0, max_users: int = 3, max_window: int = 10
) -> List[CheckResult]:
    results: List[CheckResult] = []
    for trial in range(trials):
        rng = RngStream(seed, trial).generator()
        scenario = random_scenario(rng, max_users, max_window)
        V = float(rng.choice([0.0, 1.0, 5.0, 20.0]))
        run_seed = int(rng.integers(0, 2**31))
        for discipline in (Discipline.FIFO, Discipline.LIFO):
            label = f"trial {trial} {discipline.value.upper()} D={list(scenario.prediction)}"
            results.extend(check_twin_pair(scenario, V, discipline, horizon, run_seed, label))
    return results


def _report(scenario: Scenario, algorithm: Algorithm, discipline: Discipline, V: float,
            horizon: int, seed: int, solution=None, twin_system: bool = False,
            strict: bool = False) -> RunReport:
    result = run(scenario, algorithm, discipline, V, horizon, seed,
                 twin_system=twin_system, strict=strict)
    return build_report(result, scenario, solution)


def _strict_report(results: List[CheckResult], label: str, scenario: Scenario,
                   discipline: Discipline, horizon: int, seed: int) -> Optional[RunReport]:
    """A PBP run at V = 10 that checks the full efficiency of every allocation"""
    try:
        report = _report(scenario, Algorithm.PBP, discipline, 10.0, horizon, seed, strict=True)
    except SimulationInvariantError as e:
        _record(results, f"full efficiency ({label})", False, e.detail)
        return None
    _record(results, f"full efficiency ({label})", True)
    return report


def zero_delay_from_base(base: RunReport, D: Sequence[int]) -> List[float]:
    """Zero-delay fraction each user should reach with windows D: the base mass at delay <= D_n"""
    return [float(sum(p.probs[: d + 1])) for p, d in zip(base.pmfs, D)]


def verify_preset(
    scenario: Scenario,
    horizon: int,
    seed: int = 1,
    shift_tol: float = 0.02,
    zero_delay_reference: Optional[Sequence[float]] = None,
    V_values: Sequence[float] = (1, 3, 5, 10, 20, 50),
    zero_delay_tol: float = 0.03,
    reduction_tol: float = 0.05,
) -> List[CheckResult]:
    """
    Long-run checks on a two-user preset with windows (5, 10) at rho = 1:
    delay shift and mean-delay reduction, LIFO zero-delay fractions, full
    efficiency of the predictive allocations, cost bound, backlog
    conservation and the linear backlog reduction.

    zero_delay_reference holds externally reported LIFO zero-delay fractions.
    They are compared and logged but do not fail the suite: the binding check
    predicts the fractions from a LIFO run without prediction.
    """
    results: List[CheckResult] = []
    base_windows = scenario.prediction
    wide = scenario.with_prediction([3 * d for d in base_windows])
    none = scenario.with_prediction([0] * scenario.n_users)
    lam = scenario.arrival_rates
    try:
        solution = solve_min_cost(scenario)
    except InfeasibleError as e:
        _record(results, "oracle feasibility", False, e.detail)
        return results

    # delay shift and mean-delay reduction, independent seeds
    base = _report(none, Algorithm.PBP, Discipline.FIFO, 10.0, horizon, seed + 1)
    pred = _strict_report(results, "FIFO", wide, Discipline.FIFO, horizon, seed)
    if pred is not None:
        tv = verify_shift(base.pmfs, pred.pmfs, wide.prediction)
        _record(results, "delay shift", tv <= shift_tol, f"max TV={tv:.4f} <= {shift_tol}")
        predicted = delay_reduction([p.probs for p in base.pmfs], lam, wide.prediction)
        measured = base.w_tot - pred.w_tot
        allowance = reduction_tol * max(base.w_tot, 1e-12)
        _record(results, "mean-delay reduction", abs(measured - predicted) <= allowance,
                f"measured {measured:.4f} vs {predicted:.4f} +- {allowance:.4f}")

    # LIFO zero-delay fractions
    lifo_base = _report(none, Algorithm.PBP, Discipline.LIFO, 10.0, horizon, seed + 1)
    lifo = _strict_report(results, "LIFO", wide, Discipline.LIFO, horizon, seed)
    if lifo is not None:
        expected = zero_delay_from_base(lifo_base, wide.prediction)
        for n, (got, want) in enumerate(zip(lifo.zero_delay, expected)):
            _record(results, f"LIFO zero-delay user {n + 1}", abs(got - want) <= zero_delay_tol,
                    f"{got:.4f} vs {want:.4f} from the shifted base")
        for n, target in enumerate(zero_delay_reference or ()):
            got = lifo.zero_delay[n]
            _record(results, f"LIFO zero-delay user {n + 1} against the reference",
                    abs(got - target) <= zero_delay_tol, f"{got:.4f} vs {target:.4f}",
                    advisory=True)

    # cost bound and monotonicity in V
    reports = [_report(scenario, Algorithm.PBP, Discipline.FIFO, V, horizon, seed, solution)
               for V in V_values]
    for r in reports:
        _record(results, f"cost bound V={r.V:g}", check_cost_bound(r),
                f"f_av={r.f_av:.4f} bound={r.f_bound:.4f} sigma={r.f_av_sigma:.2g}")
    for prev, cur in zip(reports, reports[1:]):
        allowance = 3 * (prev.f_av_sigma + cur.f_av_sigma)
        _record(results, f"cost non-increasing V={prev.V:g}->{cur.V:g}",
                cur.f_av <= prev.f_av + allowance, f"{prev.f_av:.4f} -> {cur.f_av:.4f}")

    # backlog conservation
    if pred is not None:
        twin = _report(wide, Algorithm.BP, Discipline.FIFO, 10.0, horizon, seed, twin_system=True)
        _record(results, "backlog conservation (same seed)", twin.q_sum_av == pred.q_sum_av,
                f"{pred.q_sum_av:.4f} vs {twin.q_sum_av:.4f}")
        rel = abs(pred.q_sum_av - base.q_sum_av) / max(base.q_sum_av, 1e-12)
        _record(results, "backlog conservation (independent seeds)", rel <= 0.02, f"{rel:.2%}")

    # linear backlog reduction at V = 50
    try:
        gamma_star: Optional[Sequence[float]] = solve_gamma_star(scenario, 50.0, solution).gamma
    except AnalysisError as e:
        sim_logger.warning(f"no gamma* for the window heuristic: {e.detail}")
        gamma_star = None
    bp = _report(scenario, Algorithm.BP, Discipline.FIFO, 50.0, horizon, seed)
    pbp = _report(scenario, Algorithm.PBP, Discipline.FIFO, 50.0, horizon, seed)
    gap = backlog_reduction_gap(bp, pbp, lam, scenario.prediction,
                                gamma_star=gamma_star, a_max=scenario.bounds.a_max)
    ok = gap.ratio is not None and 0.9 <= gap.ratio <= 1.1
    _record(results, "linear backlog reduction", ok,
            f"observed {gap.observed:.3f} vs predicted {gap.predicted:.3f}")
    return results


def failures(results: Sequence[CheckResult]) -> List[CheckResult]:
    return [r for r in results if not r.passed and not r.advisory]


def reference_mismatches(results: Sequence[CheckResult]) -> List[CheckResult]:
    return [r for r in results if not r.passed and r.advisory]
