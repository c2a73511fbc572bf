"""Analytic effect of a prediction window on a delay distribution."""

from typing import Sequence

import numpy as np

from ..exceptions import AnalysisError

PMF_TOL = 1e-9


def check_pmf(pmf: Sequence[float]) -> np.ndarray:
    p = np.asarray(pmf, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise AnalysisError("malformed pmf: expected a non-empty 1-d array")
    if (p < 0).any():
        raise AnalysisError("malformed pmf: negative probability")
    total = p.sum()
    if abs(total - 1.0) > PMF_TOL:
        raise AnalysisError(f"malformed pmf: mass {total:.12g} != 1")
    return p


def shift_distribution(pmf: Sequence[float], D: int) -> np.ndarray:
    """
    Delay pmf with a window of D slots, from the pmf without prediction:
    everything at delay <= D collapses onto 0, the tail moves left by D.
    """
    p = check_pmf(pmf)
    if D < 0:
        raise AnalysisError("prediction window must be non-negative")
    if D == 0:
        return p.copy()
    if D >= p.size - 1:
        return np.array([p.sum()])
    out = p[D:].copy()
    out[0] = p[:D + 1].sum()
    return out


def mean_delay(pmf: Sequence[float]) -> float:
    p = np.asarray(pmf, dtype=float)
    return float(np.arange(p.size) @ p)


def weighted_mean_delay(pmfs: Sequence[Sequence[float]], lam: Sequence[float]) -> float:
    """W_tot: arrival-rate weighted mean delay"""
    lam = _check_rates(lam, len(pmfs))
    return float(sum(l * mean_delay(p) for l, p in zip(lam, pmfs)) / lam.sum())


def delay_reduction(
    pmfs: Sequence[Sequence[float]], lam: Sequence[float], D: Sequence[int]
) -> float:
    """
    Drop of the weighted mean delay when user n gets a window of D[n] slots:

        sum_n lam_n ( sum_{1<=k<=D_n} k p_nk + D_n sum_{k>=1} p_n(k+D_n) ) / sum_n lam_n
    """
    lam = _check_rates(lam, len(pmfs))
    if len(D) != len(pmfs):
        raise AnalysisError("one prediction window per pmf expected")
    total = 0.0
    for rate, pmf, d in zip(lam, pmfs, D):
        p = check_pmf(pmf)
        k = np.arange(p.size)
        head = float(k[1:d + 1] @ p[1:d + 1])
        tail = d * float(p[d + 1:].sum())
        total += rate * (head + tail)
    return total / float(lam.sum())


def _check_rates(lam: Sequence[float], n: int) -> np.ndarray:
    rates = np.asarray(lam, dtype=float)
    if rates.size != n:
        raise AnalysisError(f"expected {n} arrival rates, got {rates.size}")
    if (rates < 0).any():
        raise AnalysisError("arrival rates must be non-negative")
    if rates.sum() <= 0:
        raise AnalysisError("all arrival rates are zero")
    return rates
