"""
Post-processing of finished runs: empirical delay distributions, run reports,
the checks of the distributional and backlog claims, and the sweep table.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .engine import PacketLog, RunResult, run_id
from .exceptions import AnalysisError, ArtifactIOError
from .oracle import (
    GammaStar,
    PolicySolution,
    backlog_bound,
    cost_bound,
    drift_constant,
    mean_delay,
    shift_distribution,
)
from .scenario import Scenario
from .scheduler import Algorithm, Discipline
from .utils.config import sim_config
from .utils.logger import sim_logger

LITTLE_GAP_WARNING = 0.05
ATTRACTION_RADII = (1, 2, 5, 10, 20, 50)


class DelayPmf(BaseModel):
    """Delay distribution of one user's served packets; probs[k] is P(delay = k)"""

    user: int
    probs: List[float]
    samples: int
    censored: int = 0
    pending: int = 0

    @property
    def zero_delay(self) -> float:
        return self.probs[0]

    @property
    def mean(self) -> float:
        return mean_delay(self.probs)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=float)


class RunReport(BaseModel):
    run_id: str
    scenario: str
    algorithm: Algorithm
    discipline: Discipline
    V: float
    prediction: List[int]
    seed: int
    horizon: int
    burn_in: int
    twin_system: bool = False
    log_base: str = "e"
    notes: List[str] = Field(default_factory=list)

    f_av: float
    f_av_sigma: float
    q_sum_av: float
    q_actual_av: float
    arrival_rates: List[float]
    pmfs: List[DelayPmf]
    zero_delay: List[float]
    w_tot: float
    n_tot: float
    littles_gap: float
    censored: List[int]
    pending: List[int]
    censored_fraction: float

    drift_constant: float
    f_star: Optional[float] = None
    f_bound: Optional[float] = None
    q_bound: Optional[float] = None
    gamma_star: Optional[List[float]] = None
    attraction: Optional[Dict[int, List[float]]] = None
    elapsed_s: float = 0.0
    extra: Dict[str, float] = Field(default_factory=dict)

    @property
    def n_users(self) -> int:
        return len(self.prediction)


def empirical_delay_pmf(
    packet_log: PacketLog, n_users: int, burn_in: Optional[int] = None
) -> List[DelayPmf]:
    """
    Histogram of the delays of served packets that arrived at or after
    burn_in (all packets when None). Censored (unserved, already arrived)
    and pending (still in the prediction window) packets are counted, never
    binned.
    """
    if len(packet_log) == 0:
        raise AnalysisError("empty packet log")
    data = packet_log.arrays()
    if burn_in is None:
        kept = np.ones(len(packet_log), dtype=bool)
    else:
        kept = data["arrival_slot"] >= burn_in
    pmfs = []
    for n in range(n_users):
        mine = kept & (data["user"] == n)
        served = mine & (data["served_slot"] >= 0)
        unserved = mine & (data["served_slot"] < 0)
        counts = np.bincount(data["delay"][served], weights=data["count"][served])
        total = int(data["count"][served].sum())
        if total == 0:
            # nothing served: a point mass at 0 with zero samples
            probs = [1.0]
        else:
            probs = [float(c) for c in counts / total]
        from_actual = data["from_actual"][unserved] == 1
        pmfs.append(
            DelayPmf(
                user=n,
                probs=probs,
                samples=total,
                censored=int(data["count"][unserved][from_actual].sum()),
                pending=int(data["count"][unserved][~from_actual].sum()),
            )
        )
    return pmfs


def batch_sigma(trace: np.ndarray, batches: int) -> float:
    """Standard error of a time average by the batch-means method"""
    if trace.size < 2 * batches:
        return float(trace.std(ddof=1) / math.sqrt(trace.size)) if trace.size > 1 else 0.0
    means = np.array([b.mean() for b in np.array_split(trace, batches)])
    return float(means.std(ddof=1) / math.sqrt(batches))


def littles_gap(q_actual_av: float, pmfs: Sequence[DelayPmf], window: int) -> float:
    """
    Relative gap between the measured actual backlog and the sum over users of
    (packets per slot) x (mean delay).
    """
    predicted = sum(p.samples / window * p.mean for p in pmfs)
    if q_actual_av == 0 and predicted == 0:
        return 0.0
    return abs(q_actual_av - predicted) / max(q_actual_av, predicted)


def weighted_totals(pmfs: Sequence[DelayPmf], lam: Sequence[float]) -> tuple:
    """(W_tot, N_tot): weighted mean delay and weighted delay sum"""
    n_tot = float(sum(l * p.mean for l, p in zip(lam, pmfs)))
    total = float(sum(lam))
    return (n_tot / total if total > 0 else 0.0), n_tot


def attraction_profile(
    result: RunResult, gamma: Sequence[float], radii: Sequence[int] = ATTRACTION_RADII
) -> Dict[int, List[float]]:
    """Per user, the fraction of slots with |Q^sum_n - gamma_n| <= r for each radius"""
    window = result.q_sum[result.window]
    profile = {}
    for n, g in enumerate(gamma):
        dist = np.abs(window[:, n] - g)
        profile[n] = [float((dist <= r).mean()) for r in radii]
    return profile


def build_report(
    result: RunResult,
    scenario: Scenario,
    solution: Optional[PolicySolution] = None,
    gamma: Optional[GammaStar] = None,
) -> RunReport:
    settings = sim_config.get_config().simulation
    window = result.horizon - result.burn_in
    pmfs = empirical_delay_pmf(
        result.packet_log, scenario.n_users, result.burn_in if result.burn_in > 0 else None
    )
    lam = list(scenario.arrival_rates)
    w_tot, n_tot = weighted_totals(pmfs, lam)
    gap = littles_gap(result.q_actual_av, pmfs, window)

    admitted = sum(result.admitted)
    censored_fraction = sum(result.censored) / admitted if admitted else 0.0
    name = run_id(result.algorithm, result.discipline, result.V, result.prediction,
                  result.seed, result.twin_system)
    if censored_fraction > settings.censored_warning_fraction:
        sim_logger.warning(
            f"{name}: {censored_fraction:.3%} of packets censored at the horizon"
        )
    if gap > LITTLE_GAP_WARNING:
        sim_logger.warning(f"{name}: Little's-law gap {gap:.1%}")

    B = drift_constant(scenario)
    report = RunReport(
        run_id=name,
        scenario=scenario.name,
        algorithm=result.algorithm,
        discipline=result.discipline,
        V=result.V,
        prediction=list(result.prediction),
        seed=result.seed,
        horizon=result.horizon,
        burn_in=result.burn_in,
        twin_system=result.twin_system,
        log_base=scenario.log_base,
        notes=list(scenario.notes),
        f_av=result.f_av,
        f_av_sigma=batch_sigma(result.costs[result.window], settings.batches),
        q_sum_av=result.q_sum_av,
        q_actual_av=result.q_actual_av,
        arrival_rates=lam,
        pmfs=pmfs,
        zero_delay=[p.zero_delay for p in pmfs],
        w_tot=w_tot,
        n_tot=n_tot,
        littles_gap=gap,
        censored=list(result.censored),
        pending=list(result.pending),
        censored_fraction=censored_fraction,
        drift_constant=B,
        elapsed_s=result.elapsed_s,
    )
    if solution is not None:
        report.f_star = solution.f_star
        report.f_bound = cost_bound(scenario, solution.f_star, result.V) if result.V > 0 else None
        report.q_bound = backlog_bound(scenario, result.V, solution.max_slack)
    if gamma is not None:
        report.gamma_star = list(gamma.gamma)
        report.attraction = attraction_profile(result, gamma.gamma)
    return report


def check_cost_bound(report: RunReport, sigmas: float = 3.0) -> bool:
    """f_av <= f* + B/V + 3 sigma"""
    if report.f_bound is None:
        raise AnalysisError(f"{report.run_id}: no oracle bound attached to the report")
    return report.f_av <= report.f_bound + sigmas * report.f_av_sigma


def total_variation(p: Sequence[float], q: Sequence[float]) -> float:
    size = max(len(p), len(q))
    a = np.zeros(size)
    b = np.zeros(size)
    a[: len(p)] = p
    b[: len(q)] = q
    return float(0.5 * np.abs(a - b).sum())


def verify_shift(
    pmf_base: Sequence[DelayPmf], pmf_pred: Sequence[DelayPmf], D: Sequence[int]
) -> float:
    """Max over users of TV(pred, shift(base, D_n))"""
    if len(pmf_base) != len(pmf_pred) or len(pmf_base) != len(D):
        raise AnalysisError("base and predictive runs have different numbers of users")
    return max(
        total_variation(pred.probs, shift_distribution(base.probs, d))
        for base, pred, d in zip(pmf_base, pmf_pred, D)
    )


def verify_shift_reports(base: RunReport, pred: RunReport) -> float:
    """
    verify_shift on two reports, after checking they form a valid pair: a
    non-predictive base (BP, or PBP with zero windows) and a PBP run.
    """
    mismatched = [
        key for key in ("scenario", "V", "discipline")
        if getattr(base, key) != getattr(pred, key)
    ]
    if mismatched:
        raise AnalysisError(f"mismatched configs: {', '.join(mismatched)} differ")
    if base.twin_system or pred.twin_system:
        raise AnalysisError("equivalent twin-system runs cannot form a shift pair")
    if pred.algorithm != Algorithm.PBP:
        raise AnalysisError(f"run {pred.run_id} is not predictive backpressure")
    if base.algorithm == Algorithm.PBP and any(base.prediction):
        raise AnalysisError(f"base run {base.run_id} must use no prediction")
    return verify_shift(base.pmfs, pred.pmfs, pred.prediction)


@dataclass(frozen=True)
class BacklogGap:
    observed: float
    predicted: float
    ratio: Optional[float]


def backlog_reduction_gap(
    report_bp: RunReport,
    report_pbp: RunReport,
    lam: Sequence[float],
    D: Sequence[int],
    gamma_star: Optional[Sequence[float]] = None,
    a_max: Optional[int] = None,
) -> BacklogGap:
    """
    Observed drop of the actual backlog (BP average minus PBP Q^(-1) average)
    against the predicted sum_n D_n lambda_n.
    """
    if report_bp.discipline != report_pbp.discipline:
        raise AnalysisError("discipline mismatch between the BP and PBP reports")
    if report_pbp.discipline != Discipline.FIFO:
        raise AnalysisError("the backlog reduction holds for FIFO service")
    if gamma_star is not None and a_max is not None:
        for n, (d, g) in enumerate(zip(D, gamma_star)):
            if d * a_max >= g:
                sim_logger.warning(
                    f"window of user {n} (D={d}) is large against gamma*={g:.1f}; "
                    "the linear reduction may not hold"
                )
    observed = report_bp.q_actual_av - report_pbp.q_actual_av
    predicted = float(sum(d * l for d, l in zip(D, lam)))
    ratio = observed / predicted if predicted > 0 else None
    return BacklogGap(observed=observed, predicted=predicted, ratio=ratio)


def predicted_backlog(
    base_pmfs: Sequence[DelayPmf], lam: Sequence[float], D: Sequence[int]
) -> float:
    """sum_n lambda_n x mean delay of the shifted base distribution"""
    return float(
        sum(l * mean_delay(shift_distribution(p.probs, d))
            for l, p, d in zip(lam, base_pmfs, D))
    )


def sweep_columns(n_users: int) -> List[str]:
    return (
        ["algo", "discipline", "V"]
        + [f"D{n + 1}" for n in range(n_users)]
        + ["seed", "T", "f_av", "f_star", "f_bound", "q_sum_av", "q_actual_av", "w_tot"]
        + [f"zero_delay_{n + 1}" for n in range(n_users)]
        + ["censored"]
    )


def summarize_sweep(reports: Sequence[RunReport]) -> pd.DataFrame:
    """One row per run, stable column order"""
    n_users = max((r.n_users for r in reports), default=0)
    rows = []
    for r in reports:
        row = {
            "algo": "twin" if r.twin_system else r.algorithm.value,
            "discipline": r.discipline.value,
            "V": r.V,
            "seed": r.seed,
            "T": r.horizon,
            "f_av": r.f_av,
            "f_star": r.f_star,
            "f_bound": r.f_bound,
            "q_sum_av": r.q_sum_av,
            "q_actual_av": r.q_actual_av,
            "w_tot": r.w_tot,
            "censored": sum(r.censored),
        }
        for n in range(n_users):
            row[f"D{n + 1}"] = r.prediction[n]
            row[f"zero_delay_{n + 1}"] = r.zero_delay[n]
        rows.append(row)
    return pd.DataFrame(rows, columns=sweep_columns(n_users))


def pmf_frame(pmfs: Sequence[DelayPmf]) -> pd.DataFrame:
    rows = [
        {"user": p.user, "delay": k, "prob": prob}
        for p in pmfs
        for k, prob in enumerate(p.probs)
        if prob > 0
    ]
    return pd.DataFrame(rows, columns=["user", "delay", "prob"])


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> None:
    try:
        frame.to_csv(path, index=False, float_format="%.10g")
    except OSError as e:
        raise ArtifactIOError(f"cannot write {path}: {e}")
