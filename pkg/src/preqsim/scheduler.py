"""
Power selection (Backpressure / Predictive Backpressure) and the fully-efficient
split of a user's service rate over its prediction-queue bank.
"""

from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from .scenario import Action, Scenario


class Discipline(str, Enum):
    FIFO = "fifo"
    LIFO = "lifo"


class Algorithm(str, Enum):
    BP = "bp"
    PBP = "pbp"


@dataclass(frozen=True)
class RateAllocation:
    """Rates for d = -1, 0, ..., D-1 of one user; rates[0] is the actual queue."""

    rates: Tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.rates)

    def rate(self, d: int) -> int:
        return self.rates[d + 1]


def objective(
    q_weights: Sequence[float], state_idx: int, scenario: Scenario, V: float
) -> np.ndarray:
    """V f(S, P) - sum_n q_n mu_n(S, P) for every action of the state"""
    weights = np.asarray(q_weights, dtype=float)
    return V * scenario.cost_tables[state_idx] - scenario.rate_tables[state_idx] @ weights


def select_action_index(
    q_weights: Sequence[float], state_idx: int, scenario: Scenario, V: float
) -> int:
    # np.argmin returns the first minimizer: ties go to the lowest action index
    return int(np.argmin(objective(q_weights, state_idx, scenario, V)))


@dataclass(frozen=True)
class ActionTable:
    """
    Per-state rate and cost rows as plain Python values, with V folded into the
    costs. Rates are kept sparse since most actions power a single user.
    """

    penalties: Tuple[Tuple[float, ...], ...]
    rates: Tuple[Tuple[Tuple[int, ...], ...], ...]
    sparse_rates: Tuple[Tuple[Tuple[Tuple[int, int], ...], ...], ...]
    costs: Tuple[Tuple[float, ...], ...]

    @classmethod
    def build(cls, scenario: Scenario, V: float) -> "ActionTable":
        costs = tuple(tuple(float(c) for c in table) for table in scenario.cost_tables)
        rates = tuple(
            tuple(tuple(int(r) for r in row) for row in table) for table in scenario.rate_tables
        )
        sparse = tuple(
            tuple(tuple((n, r) for n, r in enumerate(row) if r) for row in table)
            for table in rates
        )
        penalties = tuple(tuple(V * c for c in row) for row in costs)
        return cls(penalties=penalties, rates=rates, sparse_rates=sparse, costs=costs)

    def argmin(self, q_weights: Sequence[float], state_idx: int) -> int:
        """Same decision as select_action_index, lowest index on ties"""
        best, best_value = 0, 0.0
        for m, (penalty, row) in enumerate(
            zip(self.penalties[state_idx], self.sparse_rates[state_idx])
        ):
            value = penalty
            for n, r in row:
                value -= q_weights[n] * r
            if m == 0 or value < best_value:
                best, best_value = m, value
        return best


def select_power(
    q_weights: Sequence[float], state: Sequence[float], scenario: Scenario, V: float
) -> Action:
    """
    The drift-plus-penalty decision. BP passes Q(t) as weights, PBP passes
    Q^sum(t); the rule itself is the same.
    """
    s = scenario.state_index(state)
    return scenario.action_sets[s][select_action_index(q_weights, s, scenario, V)]


def discipline_order(depth: int, discipline: Discipline) -> List[int]:
    """Queue indices d in service order (oldest first for FIFO)"""
    order = list(range(-1, depth))
    if discipline == Discipline.LIFO:
        order.reverse()
    return order


def distribute_rates(
    total_mu: int, queue_sizes: Sequence[int], discipline: Discipline
) -> RateAllocation:
    """
    Greedy fully-efficient allocation. queue_sizes[0] is Q^(-1), queue_sizes[d+1]
    is Q^(d). Surplus rate lands on the last queue in discipline order.
    """
    depth = len(queue_sizes) - 1
    rates = [0] * len(queue_sizes)
    remaining = total_mu
    order = discipline_order(depth, discipline)
    for d in order:
        give = min(remaining, queue_sizes[d + 1])
        rates[d + 1] = give
        remaining -= give
        if remaining == 0:
            break
    rates[order[-1] + 1] += remaining
    return RateAllocation(tuple(rates))


def is_fully_efficient(
    allocation: RateAllocation, queue_sizes: Sequence[int], total_mu: int
) -> bool:
    """Both conditions of full efficiency: all rate used, no premature over-service"""
    if allocation.total != total_mu or any(r < 0 for r in allocation.rates):
        return False
    pairs = list(zip(allocation.rates, queue_sizes))
    # a queue may get more than it holds only if no queue gets less
    if any(r > q for r, q in pairs):
        return all(r >= q for r, q in pairs)
    return True


def served_counts(allocation: RateAllocation, queue_sizes: Sequence[int]) -> List[int]:
    return [min(r, q) for r, q in zip(allocation.rates, queue_sizes)]
