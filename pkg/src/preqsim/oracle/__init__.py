"""Offline solvers: min-cost policy LP, dual maximizer, delay-shift formulas."""

from .delay import (
    check_pmf,
    delay_reduction,
    mean_delay,
    shift_distribution,
    weighted_mean_delay,
)
from .dual import DualPoint, GammaStar, dual_value, dual_values, solve_gamma_star, supergradient
from .min_cost import (
    PolicySolution,
    backlog_bound,
    brute_force_min_cost,
    cost_bound,
    drift_constant,
    grid_min_cost,
    max_rates,
    solve_max_slack,
    solve_min_cost,
)
from .simplex import LPResult, simplex_minimize, vertex_minimize

__all__ = [
    "DualPoint",
    "GammaStar",
    "LPResult",
    "PolicySolution",
    "backlog_bound",
    "brute_force_min_cost",
    "check_pmf",
    "cost_bound",
    "delay_reduction",
    "drift_constant",
    "dual_value",
    "dual_values",
    "grid_min_cost",
    "max_rates",
    "mean_delay",
    "shift_distribution",
    "simplex_minimize",
    "solve_gamma_star",
    "solve_max_slack",
    "solve_min_cost",
    "supergradient",
    "vertex_minimize",
    "weighted_mean_delay",
]
