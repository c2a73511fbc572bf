"""
Tests for the power decision and the fully-efficient rate split
"""

import math

import numpy as np
import pytest

from preqsim.presets import random_scenario
from preqsim.scheduler import (
    ActionTable,
    Discipline,
    RateAllocation,
    discipline_order,
    distribute_rates,
    is_fully_efficient,
    objective,
    select_action_index,
    select_power,
    served_counts,
)


class TestPowerSelection:
    """Test suite for the drift-plus-penalty decision"""

    def test_empty_queues_pick_zero_power(self, downlink):
        """With no backlog every action only costs V f"""
        assert select_power([0, 0], (2, 2), downlink, V=10) == (0.0, 0.0)

    def test_large_backlog_serves_the_heavier_user(self, downlink):
        """Q = (100, 0) in state (2, 2): ten units of power to user 1 (rate 3)"""
        assert select_power([100, 0], (2, 2), downlink, V=1) == (10.0, 0.0)

    def test_zero_V_ignores_cost(self, downlink):
        assert select_power([0, 5], (1, 2), downlink, V=0) == (0.0, 10.0)

    def test_objective_values(self, downlink):
        """V f - q . mu for every action of state (1, 1)"""
        s = downlink.state_index((1, 1))
        values = objective([4, 2], s, downlink, V=1)
        # actions (0,0), (5,0), (10,0), (0,5), (0,10) give mu (0,0), (1,0), (2,0), (0,1), (0,2)
        assert values.tolist() == [0.0, 1.0, 2.0, 3.0, 6.0]

    def test_ties_go_to_the_lowest_index(self, downlink):
        """q = (5, 0) in state (1, 1): (0,0) and (5,0) both score 0"""
        s = downlink.state_index((1, 1))
        assert objective([5, 0], s, downlink, V=1)[[0, 1]].tolist() == [0.0, 0.0]
        assert select_action_index([5, 0], s, downlink, V=1) == 0


def exhaustive_choice(scenario, state, q, V, rate_rule):
    """Lowest-index minimizer of V f - q . mu, evaluated action by action"""
    best, best_value = None, None
    for action in scenario.action_sets[scenario.state_index(state)]:
        mu = rate_rule(state, action)
        value = V * sum(action) - sum(w * r for w, r in zip(q, mu))
        if best_value is None or value < best_value:
            best, best_value = action, value
    return best


def downlink_rates(state, action):
    return [math.floor(math.log(1 + s * p)) for s, p in zip(state, action)]


def linear_rates(state, action):
    return [s * p for s, p in zip(state, action)]


class TestPowerSelectionProperties:
    """Test suite for the decision rule against exhaustive evaluation"""

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_exhaustive_search_on_the_downlink(self, downlink, seed):
        rng = np.random.default_rng(seed)
        for _ in range(200):
            state = downlink.states[int(rng.integers(downlink.n_states))]
            q = rng.uniform(0, 60, size=2)
            V = float(rng.uniform(0, 20))
            expected = exhaustive_choice(downlink, state, q, V, downlink_rates)
            assert select_power(q, state, downlink, V) == expected

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exhaustive_search_on_random_systems(self, seed):
        rng = np.random.default_rng(200 + seed)
        scenario = random_scenario(rng)
        for _ in range(100):
            state = scenario.states[int(rng.integers(scenario.n_states))]
            q = rng.uniform(0, 30, size=scenario.n_users)
            V = float(rng.uniform(0, 10))
            expected = exhaustive_choice(scenario, state, q, V, linear_rates)
            assert select_power(q, state, scenario, V) == expected

    @pytest.mark.parametrize("factor", [2, 3, 10])
    def test_scaling_q_and_V_keeps_the_decision(self, downlink, factor):
        """Integer weights keep the scaled objective exact, ties included"""
        rng = np.random.default_rng(factor)
        for _ in range(300):
            s = int(rng.integers(downlink.n_states))
            q = rng.integers(0, 40, size=2)
            V = int(rng.integers(0, 20))
            assert select_action_index(factor * q, s, downlink, factor * V) == (
                select_action_index(q, s, downlink, V)
            )

    @pytest.mark.parametrize("V", [0.0, 1.0, 2.5, 10.0, 50.0])
    def test_action_table_agrees_with_objective(self, downlink, V):
        """The engine's precomputed table takes the same decisions, ties included"""
        table = ActionTable.build(downlink, V)
        for s in range(downlink.n_states):
            for q1 in range(0, 60, 3):
                for q2 in range(0, 60, 3):
                    assert table.argmin([q1, q2], s) == select_action_index([q1, q2], s, downlink, V)

    def test_action_table_rows(self, downlink):
        table = ActionTable.build(downlink, 10.0)
        s = downlink.state_index((2, 2))
        assert table.rates[s] == ((0, 0), (2, 0), (3, 0), (0, 2), (0, 3))
        assert table.penalties[s] == (0.0, 50.0, 100.0, 50.0, 100.0)
        assert table.sparse_rates[s][0] == ()


class TestRateSplit:
    """Test suite for distributing a user's rate over its queue bank"""

    def test_discipline_order(self):
        assert discipline_order(2, Discipline.FIFO) == [-1, 0, 1]
        assert discipline_order(2, Discipline.LIFO) == [1, 0, -1]

    def test_fifo_serves_actual_queue_first(self):
        alloc = distribute_rates(3, [2, 1, 4], Discipline.FIFO)
        assert alloc.rates == (2, 1, 0)
        assert alloc.rate(-1) == 2

    def test_lifo_serves_farthest_window_first(self):
        alloc = distribute_rates(3, [2, 1, 4], Discipline.LIFO)
        assert alloc.rates == (0, 0, 3)

    def test_surplus_lands_on_the_last_queue(self):
        """Rate above the total backlog is still fully allocated"""
        fifo = distribute_rates(5, [1, 0, 1], Discipline.FIFO)
        assert fifo.rates == (1, 0, 4)
        lifo = distribute_rates(5, [1, 0, 1], Discipline.LIFO)
        assert lifo.rates == (4, 0, 1)

    def test_depth_zero(self):
        assert distribute_rates(2, [0], Discipline.FIFO).rates == (2,)

    @pytest.mark.parametrize("discipline", [Discipline.FIFO, Discipline.LIFO])
    @pytest.mark.parametrize("seed", range(5))
    def test_greedy_split_is_fully_efficient(self, discipline, seed):
        rng = np.random.default_rng(seed)
        for _ in range(200):
            sizes = [int(x) for x in rng.integers(0, 5, size=int(rng.integers(1, 6)))]
            total = int(rng.integers(0, 15))
            alloc = distribute_rates(total, sizes, discipline)
            assert alloc.total == total
            assert is_fully_efficient(alloc, sizes, total)
            assert sum(served_counts(alloc, sizes)) == min(total, sum(sizes))

    def test_detects_premature_over_service(self):
        """Over-serving one queue while another still holds packets is not efficient"""
        assert not is_fully_efficient(RateAllocation((0, 3)), [1, 2], 3)

    def test_detects_unused_rate(self):
        assert not is_fully_efficient(RateAllocation((1, 0)), [1, 2], 3)
