"""
Minimum-cost stationary randomized policy.

One probability vector per channel state over that state's action list; the
policy must serve every user at least at its arrival rate. The optimum f_av*
never depends on the prediction windows, which is why nothing here takes D.
"""

from dataclasses import dataclass
from math import comb
from typing import List, Optional, Tuple

import numpy as np

from ..exceptions import InfeasibleError
from ..scenario import Scenario
from ..utils.config import sim_config
from ..utils.logger import sim_logger
from .simplex import EQ, GE, LPResult, simplex_minimize, vertex_minimize


@dataclass(frozen=True)
class PolicySolution:
    probabilities: Tuple[Tuple[float, ...], ...]
    f_star: float
    rates: Tuple[float, ...]
    arrival_rates: Tuple[float, ...]
    slack: float
    max_slack: float
    max_rates: Tuple[float, ...]

    def support(self, state_idx: int, tol: float = 1e-12) -> List[int]:
        """Action indices played with positive probability in a state"""
        return [m for m, p in enumerate(self.probabilities[state_idx]) if p > tol]

    def to_dict(self) -> dict:
        return {
            "f_star": self.f_star,
            "probabilities": [list(p) for p in self.probabilities],
            "rates": list(self.rates),
            "arrival_rates": list(self.arrival_rates),
            "slack": self.slack,
            "max_slack": self.max_slack,
            "max_rates": list(self.max_rates),
        }


def _offsets(scenario: Scenario) -> List[int]:
    offsets = [0]
    for actions in scenario.action_sets:
        offsets.append(offsets[-1] + len(actions))
    return offsets


def _policy_lp(scenario: Scenario, with_slack: bool):
    """Constraint system over x_{s,m} (and a trailing eta column if with_slack)"""
    offsets = _offsets(scenario)
    n_vars = offsets[-1] + (1 if with_slack else 0)
    pi = np.asarray(scenario.state_probs, dtype=float)
    A, b, senses = [], [], []

    for s in range(scenario.n_states):
        row = np.zeros(n_vars)
        row[offsets[s]:offsets[s + 1]] = 1.0
        A.append(row)
        b.append(1.0)
        senses.append(EQ)

    for n in range(scenario.n_users):
        row = np.zeros(n_vars)
        for s in range(scenario.n_states):
            row[offsets[s]:offsets[s + 1]] = pi[s] * scenario.rate_tables[s][:, n]
        if with_slack:
            row[-1] = -1.0
        A.append(row)
        b.append(scenario.arrival_rates[n])
        senses.append(GE)

    cost = np.zeros(n_vars)
    for s in range(scenario.n_states):
        cost[offsets[s]:offsets[s + 1]] = pi[s] * scenario.cost_tables[s]
    return cost, np.array(A), np.array(b), senses, offsets


def max_rates(scenario: Scenario) -> np.ndarray:
    """Largest average rate each user can get on its own"""
    pi = np.asarray(scenario.state_probs, dtype=float)
    return np.array(
        [
            sum(pi[s] * scenario.rate_tables[s][:, n].max() for s in range(scenario.n_states))
            for n in range(scenario.n_users)
        ]
    )


def _infeasible(scenario: Scenario, caps: np.ndarray) -> InfeasibleError:
    lam = scenario.arrival_rates
    binding = [n for n in range(scenario.n_users) if lam[n] > caps[n] + 1e-12]
    if binding:
        parts = [f"user {n} needs rate {lam[n]:g} but can get at most {caps[n]:g}"
                 for n in binding]
        return InfeasibleError("no randomized policy meets the arrival rates: "
                               + "; ".join(parts), users=binding)
    return InfeasibleError(
        "no randomized policy meets the arrival rates: users "
        f"{list(range(scenario.n_users))} are jointly infeasible (rate constraints conflict)",
        users=list(range(scenario.n_users)),
    )


def _unpack(scenario: Scenario, x: np.ndarray, offsets: List[int]) -> Tuple[Tuple[float, ...], ...]:
    return tuple(
        tuple(float(v) for v in x[offsets[s]:offsets[s + 1]])
        for s in range(scenario.n_states)
    )


def policy_rates(scenario: Scenario, probabilities) -> np.ndarray:
    pi = scenario.state_probs
    return sum(
        pi[s] * np.asarray(probabilities[s]) @ scenario.rate_tables[s]
        for s in range(scenario.n_states)
    )


def solve_max_slack(scenario: Scenario, tol: Optional[float] = None) -> float:
    """The largest eta with sum pi mu x - eta >= lambda for some randomized policy"""
    tol = tol if tol is not None else sim_config.get_config().oracle.tolerance
    _, A, b, senses, _ = _policy_lp(scenario, with_slack=True)
    c = np.zeros(A.shape[1])
    c[-1] = -1.0
    res = simplex_minimize(c, A, b, senses, tol=tol)
    if res.status == "infeasible":
        raise _infeasible(scenario, max_rates(scenario))
    return float(res.x[-1])


def solve_min_cost(scenario: Scenario, tol: Optional[float] = None) -> PolicySolution:
    """
    Exact LP for f_av* over stationary randomized policies.

    Raises InfeasibleError naming the users whose rate cannot be met.
    """
    tol = tol if tol is not None else sim_config.get_config().oracle.tolerance
    c, A, b, senses, offsets = _policy_lp(scenario, with_slack=False)
    caps = max_rates(scenario)
    res = simplex_minimize(c, A, b, senses, tol=tol)
    if res.status == "infeasible":
        raise _infeasible(scenario, caps)

    probabilities = _unpack(scenario, res.x, offsets)
    rates = policy_rates(scenario, probabilities)
    lam = np.asarray(scenario.arrival_rates)
    solution = PolicySolution(
        probabilities=probabilities,
        f_star=float(res.fun),
        rates=tuple(float(r) for r in rates),
        arrival_rates=tuple(scenario.arrival_rates),
        slack=float((rates - lam).min()),
        max_slack=solve_max_slack(scenario, tol),
        max_rates=tuple(float(r) for r in caps),
    )
    sim_logger.debug(
        f"min-cost LP for '{scenario.name}': f*={solution.f_star:.6f} "
        f"eta_max={solution.max_slack:.4f} ({res.iterations} pivots)"
    )
    return solution


def brute_force_min_cost(scenario: Scenario, max_bases: int = 200_000) -> float:
    """
    f_av* by enumerating every vertex of the feasible polytope. Independent of
    the simplex code path; used to cross-check it.
    """
    c, A, b, senses, _ = _policy_lp(scenario, with_slack=False)
    n_cols = A.shape[1] + sum(1 for s in senses if s != EQ)
    if comb(n_cols, A.shape[0]) > max_bases:
        raise ValueError(f"too many bases to enumerate for '{scenario.name}'")
    res: LPResult = vertex_minimize(c, A, b, senses)
    if not res.success:
        raise _infeasible(scenario, max_rates(scenario))
    return float(res.fun)


def grid_min_cost(scenario: Scenario, step: float = 0.01) -> float:
    """
    Best feasible point of a step-sized grid on the action simplex of a
    single-state scenario.
    """
    if scenario.n_states != 1:
        raise ValueError("grid search covers single-state scenarios only")
    rates = scenario.rate_tables[0].astype(float)
    costs = scenario.cost_tables[0]
    lam = np.asarray(scenario.arrival_rates)
    k = int(round(1.0 / step))
    best = np.inf
    for counts in _compositions(k, len(costs)):
        x = np.asarray(counts, dtype=float) / k
        if (x @ rates >= lam - 1e-12).all():
            best = min(best, float(x @ costs))
    if not np.isfinite(best):
        raise _infeasible(scenario, max_rates(scenario))
    return best


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


# Backlog bound constants


def drift_constant(scenario: Scenario) -> float:
    """B = N/2 (mu_max^2 + A_max^2)"""
    b = scenario.bounds
    return scenario.n_users / 2.0 * (b.mu_max**2 + b.a_max**2)


def cost_bound(scenario: Scenario, f_star: float, V: float) -> float:
    return f_star + drift_constant(scenario) / V


def backlog_bound(scenario: Scenario, V: float, eta: float) -> float:
    """(B + V f_max) / eta, the average total backlog bound; inf when eta <= 0"""
    if eta <= 0:
        return float("inf")
    return (drift_constant(scenario) + V * scenario.bounds.f_max) / eta
