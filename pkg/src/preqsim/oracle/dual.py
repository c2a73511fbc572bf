"""
Dual function of the V-scaled min-cost problem and its maximizer.

    g(gamma) = sum_s pi_s min_m [ V f(s, m) + gamma . (lambda - mu(s, m)) ]

g is concave and piecewise linear; every evaluation also yields a
supergradient, lambda - sum_s pi_s mu(s, m*_s).
"""

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import AnalysisError
from ..scenario import Scenario
from ..utils.config import OracleSettings, sim_config
from ..utils.logger import sim_logger
from .min_cost import PolicySolution, solve_min_cost
from .simplex import GE, LE, simplex_minimize

MAX_GRID_POINTS = 100_000


@dataclass(frozen=True)
class DualPoint:
    gamma: Tuple[float, ...]
    value: float
    minimizers: Tuple[int, ...]


@dataclass(frozen=True)
class GammaStar:
    gamma: Tuple[float, ...]
    value: float
    plateau_low: Tuple[float, ...]
    plateau_high: Tuple[float, ...]
    plateau_centroid: Tuple[float, ...]
    plateau_min_sum: Tuple[float, ...]
    diameter: float
    unique: bool
    grid_best: Tuple[float, ...]
    search_box: float
    cuts: int

    def to_dict(self) -> dict:
        return {
            "gamma_star": list(self.gamma),
            "g_star": self.value,
            "plateau_low": list(self.plateau_low),
            "plateau_high": list(self.plateau_high),
            "plateau_centroid": list(self.plateau_centroid),
            "plateau_min_sum": list(self.plateau_min_sum),
            "plateau_diameter": self.diameter,
            "unique": self.unique,
            "grid_best": list(self.grid_best),
            "search_box": self.search_box,
            "cuts": self.cuts,
        }


def _check_gamma(gamma: np.ndarray, n_users: int) -> None:
    if gamma.shape[-1] != n_users:
        raise ValueError(f"gamma must have {n_users} coordinates")
    if (gamma < 0).any():
        raise ValueError("gamma must be non-negative")


def dual_value(scenario: Scenario, V: float, gamma: Sequence[float]) -> DualPoint:
    g = np.asarray(gamma, dtype=float)
    _check_gamma(g, scenario.n_users)
    lam = np.asarray(scenario.arrival_rates)
    value, minimizers = 0.0, []
    for s, prob in enumerate(scenario.state_probs):
        bracket = V * scenario.cost_tables[s] + (lam - scenario.rate_tables[s]) @ g
        m = int(np.argmin(bracket))
        minimizers.append(m)
        value += prob * float(bracket[m])
    return DualPoint(tuple(float(x) for x in g), value, tuple(minimizers))


def dual_values(scenario: Scenario, V: float, gammas: np.ndarray) -> np.ndarray:
    """g at every row of a (P, N) array of points"""
    G = np.atleast_2d(np.asarray(gammas, dtype=float))
    _check_gamma(G, scenario.n_users)
    lam = np.asarray(scenario.arrival_rates)
    values = np.zeros(G.shape[0])
    for s, prob in enumerate(scenario.state_probs):
        # (P, M): V f_m + gamma . (lambda - mu_m)
        bracket = V * scenario.cost_tables[s][None, :] + G @ (lam[:, None] - scenario.rate_tables[s].T)
        values += prob * bracket.min(axis=1)
    return values


def supergradient(scenario: Scenario, point: DualPoint) -> np.ndarray:
    lam = np.asarray(scenario.arrival_rates, dtype=float)
    served = sum(
        prob * scenario.rate_tables[s][m]
        for s, (prob, m) in enumerate(zip(scenario.state_probs, point.minimizers))
    )
    return lam - served


def _grid(box: float, n_users: int, points: int) -> np.ndarray:
    per_axis = min(points, max(2, int(MAX_GRID_POINTS ** (1.0 / n_users))))
    axis = np.linspace(0.0, box, per_axis)
    mesh = np.meshgrid(*([axis] * n_users), indexing="ij")
    # ij indexing enumerates points in lexicographic order
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_maximize(scenario: Scenario, V: float, box: float, points: int) -> Tuple[np.ndarray, float]:
    """
    Best grid point over [0, box]^N. Ties go to the lexicographically
    smallest point, so the result does not depend on evaluation order.
    """
    G = _grid(box, scenario.n_users, points)
    values = dual_values(scenario, V, G)
    best = int(np.argmax(values))
    return G[best], float(values[best])


def _kelley(
    scenario: Scenario, V: float, box: float, seeds: np.ndarray, settings: OracleSettings
) -> Tuple[DualPoint, int]:
    """Cutting-plane ascent on [0, box]^N; exact for piecewise-linear g"""
    n = scenario.n_users
    cuts: List[Tuple[np.ndarray, float]] = []  # (supergradient, offset): t <= offset + s.gamma
    best: Optional[DualPoint] = None

    def add_cut(point: DualPoint) -> None:
        s = supergradient(scenario, point)
        cuts.append((s, point.value - float(s @ np.asarray(point.gamma))))

    for gamma in seeds:
        point = dual_value(scenario, V, gamma)
        add_cut(point)
        if best is None or point.value > best.value:
            best = point

    scale = max(1.0, abs(best.value))
    while len(cuts) < settings.max_cuts:
        # variables (gamma_1..gamma_N, t); maximize t
        A, b, senses = [], [], []
        for s, offset in cuts:
            A.append(np.concatenate([-s, [1.0]]))
            b.append(offset)
            senses.append(LE)
        for i in range(n):
            row = np.zeros(n + 1)
            row[i] = 1.0
            A.append(row)
            b.append(box)
            senses.append(LE)
        c = np.zeros(n + 1)
        c[-1] = -1.0
        res = simplex_minimize(c, A, b, senses, tol=settings.tolerance)
        if not res.success:
            break
        upper = float(res.x[-1])
        if upper - best.value <= settings.tolerance * scale:
            break
        point = dual_value(scenario, V, np.clip(res.x[:n], 0.0, box))
        if point.value > best.value:
            best = point
        add_cut(point)
    else:
        sim_logger.warning(f"gamma* refinement stopped after {settings.max_cuts} cuts")
    return best, len(cuts)


def _plateau_lp(
    scenario: Scenario, V: float, g_floor: float, box: float, objective: np.ndarray, tol: float
) -> np.ndarray:
    """
    Optimize objective . gamma over {gamma in [0, box]^N : g(gamma) >= g_floor}
    through the epigraph form with per-state variables z_s = z+_s - z-_s.
    """
    n, S = scenario.n_users, scenario.n_states
    width = n + 2 * S
    lam = np.asarray(scenario.arrival_rates)
    A, b, senses = [], [], []
    for s in range(S):
        for m in range(len(scenario.action_sets[s])):
            row = np.zeros(width)
            row[:n] = -(lam - scenario.rate_tables[s][m])
            row[n + s] = 1.0
            row[n + S + s] = -1.0
            A.append(row)
            b.append(V * float(scenario.cost_tables[s][m]))
            senses.append(LE)
    row = np.zeros(width)
    row[n:n + S] = scenario.state_probs
    row[n + S:] = -np.asarray(scenario.state_probs)
    A.append(row)
    b.append(g_floor)
    senses.append(GE)
    for i in range(n):
        row = np.zeros(width)
        row[i] = 1.0
        A.append(row)
        b.append(box)
        senses.append(LE)
    c = np.zeros(width)
    c[:n] = objective
    res = simplex_minimize(c, A, b, senses, tol=tol)
    if not res.success:
        raise AnalysisError(f"plateau LP ended {res.status}")
    return res.x[:n]


def solve_gamma_star(
    scenario: Scenario,
    V: float,
    solution: Optional[PolicySolution] = None,
    settings: Optional[OracleSettings] = None,
) -> GammaStar:
    """
    Maximize g over gamma >= 0: coarse grid, cutting-plane refinement, then
    the optimal plateau. A unique gamma* is the plateau point with the smallest
    coordinate sum; otherwise the plateau centroid is reported. The plateau
    box and its diameter are the uniqueness diagnostic.
    """
    settings = settings or sim_config.get_config().oracle
    solution = solution or solve_min_cost(scenario)
    if solution.max_slack <= settings.tolerance:
        raise AnalysisError(
            "dual may be unbounded: the slack check failed "
            f"(max slack {solution.max_slack:g} <= 0)"
        )
    n = scenario.n_users
    box = V * scenario.bounds.f_max / solution.max_slack
    if box <= 0:
        zero = tuple([0.0] * n)
        return GammaStar(zero, dual_value(scenario, V, zero).value, zero, zero, zero, zero,
                         0.0, True, zero, 0.0, 0)

    grid_best, _ = grid_maximize(scenario, V, box, settings.gamma_grid_points)
    corners = np.array(list(itertools.product([0.0, box], repeat=n)))
    seeds = np.vstack([grid_best[None, :], corners])
    best, n_cuts = _kelley(scenario, V, box, seeds, settings)

    slack = 2 * settings.tolerance * max(1.0, abs(best.value))
    floor = best.value - slack
    tol = settings.tolerance
    low, high = np.zeros(n), np.zeros(n)
    extremes = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        lowest = _plateau_lp(scenario, V, floor, box, e, tol)
        highest = _plateau_lp(scenario, V, floor, box, -e, tol)
        low[i], high[i] = lowest[i], highest[i]
        extremes.extend([lowest, highest])
    min_sum = np.clip(_plateau_lp(scenario, V, floor, box, np.ones(n), tol), 0.0, box)
    # the mean of plateau points stays on the plateau (g is concave)
    centroid = np.clip(np.mean(extremes, axis=0), 0.0, box)
    diameter = float(np.linalg.norm(high - low))
    unique = diameter <= settings.gamma_resolution * V
    gamma = (min_sum if unique else centroid).copy()
    # g does not increase in gamma_n when lambda_n = 0
    gamma[np.asarray(scenario.arrival_rates) == 0] = 0.0
    result = GammaStar(
        gamma=tuple(float(x) for x in gamma),
        value=dual_value(scenario, V, gamma).value,
        plateau_low=tuple(float(x) for x in low),
        plateau_high=tuple(float(x) for x in high),
        plateau_centroid=tuple(float(x) for x in centroid),
        plateau_min_sum=tuple(float(x) for x in min_sum),
        diameter=diameter,
        unique=unique,
        grid_best=tuple(float(x) for x in grid_best),
        search_box=box,
        cuts=n_cuts,
    )
    if not result.unique:
        sim_logger.warning(
            f"gamma* is not unique for V={V:g}: plateau diameter {diameter:.4g}"
        )
    return result
