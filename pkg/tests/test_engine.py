"""
Tests for the slot dynamics: a hand-checked trace, the twin counter, the
equivalent twin system and packet conservation
"""

import numpy as np
import pytest

from preqsim.engine import init, run, run_id, step
from preqsim.exceptions import ConfigError, SimulationInvariantError, TwinMismatchError
from preqsim.presets import random_scenario
from preqsim.scenario import ArrivalSampler, ChannelSampler, ScriptedArrivals, ScriptedChannel
from preqsim.scheduler import Algorithm, Discipline

from tests.helpers import TRACE_ARRIVALS, constant_rate_scenario, scripted_run


def delays_by_arrival(result):
    out = {}
    for record in result.packet_log.records():
        if record.served_slot is not None:
            out.setdefault(record.arrival_slot, []).append(record.delay)
    return {k: sorted(v) for k, v in out.items()}


class TestHandTrace:
    """Test suite for D = 2, arrivals (2, 1, 0, 3, 0), one packet served per slot"""

    def setup_class(self):
        self.fifo = scripted_run(rate=1)

    def test_actual_queue_path(self):
        assert self.fifo.q_actual[:, 0].tolist() == [0, 1, 1, 0, 2, 1, 0]

    def test_queue_sum_path(self):
        assert self.fifo.q_sum[:, 0].tolist() == [3, 2, 4, 3, 2, 1, 0]

    def test_packet_delays(self):
        """Served from a prediction queue: delay 0; from Q^(-1): slots since arrival"""
        assert delays_by_arrival(self.fifo) == {0: [0, 1], 1: [1], 3: [0, 1, 2]}

    def test_nothing_left_at_the_horizon(self):
        assert self.fifo.admitted == (6,)
        assert self.fifo.served == (6,)
        assert self.fifo.censored == (0,)
        assert self.fifo.pending == (0,)

    def test_costs(self):
        assert self.fifo.costs.tolist() == [1.0] * 7
        assert self.fifo.f_av == 1.0

    def test_fast_server_serves_everything_ahead(self):
        """Two packets per slot with D = 2 pre-serves every packet"""
        fast = scripted_run(rate=2)
        assert fast.q_sum[:5, 0].tolist() == [3, 1, 3, 1, 0]
        assert all(r.delay == 0 for r in fast.packet_log.records())

    def test_lifo_keeps_the_same_totals(self):
        """The discipline changes who waits, not how much is queued"""
        lifo = scripted_run(rate=1, discipline=Discipline.LIFO)
        assert lifo.q_sum[:, 0].tolist() == self.fifo.q_sum[:, 0].tolist()
        assert lifo.q_actual[:, 0].tolist() == [0, 2, 1, 1, 2, 1, 0]
        assert delays_by_arrival(lifo) == {0: [1, 5], 1: [0], 3: [0, 0, 1]}

    def test_twin_system_tracks_queue_sum(self):
        """BP on delayed arrivals with the preloaded backlog has Q(t) = Q^sum(t)"""
        twin = scripted_run(rate=1, algorithm=Algorithm.BP, twin_system=True)
        assert twin.q_sum[:, 0].tolist() == [3, 2, 4, 3, 2, 1, 0]

    def test_twin_delays_exceed_predictive_delays_by_the_window(self):
        """Per packet: predictive delay = max(twin delay - D, 0)"""
        twin = scripted_run(rate=1, algorithm=Algorithm.BP, twin_system=True)
        twin_delays = sorted(max(r.delay - 2, 0) for r in twin.packet_log.records())
        assert twin_delays == sorted(r.delay for r in self.fifo.packet_log.records())


class TestTwinCounter:
    """Test suite for the Q-hat = Q^sum check"""

    def test_corrupted_counter_is_reported(self):
        scenario = constant_rate_scenario(rate=1, prediction=(2,))
        state = init(scenario, ScriptedArrivals(TRACE_ARRIVALS), ScriptedChannel([0]))
        step(state)
        state.bank.users[0].q_hat += 1
        with pytest.raises(TwinMismatchError) as exc:
            step(state)
        err = exc.value
        assert err.user == 0
        assert err.slot == 2
        assert err.exit_code == 2
        assert len(err.q_sum_tail) <= 10
        assert err.q_sum_tail[-1] != err.q_hat_tail[-1]

    def test_twin_system_requires_bp(self):
        scenario = constant_rate_scenario()
        with pytest.raises(ConfigError):
            run(scenario, Algorithm.PBP, Discipline.FIFO, 1.0, 10, 0, twin_system=True)

    @pytest.mark.parametrize("discipline", [Discipline.FIFO, Discipline.LIFO])
    @pytest.mark.parametrize("seed", range(8))
    def test_random_systems(self, discipline, seed):
        """The counter matches on random systems; strict mode checks every allocation"""
        scenario = random_scenario(np.random.default_rng(100 + seed))
        result = run(scenario, Algorithm.PBP, discipline, 5.0, 1500, seed,
                     check_twin=True, strict=True)
        twin = run(scenario, Algorithm.BP, discipline, 5.0, 1500, seed,
                   twin_system=True, strict=True)
        assert np.array_equal(result.q_sum, twin.q_sum)
        assert np.array_equal(result.costs, twin.costs)


class TestFastPath:
    """Test suite for the plain run loop against the checked, traced one"""

    @pytest.mark.parametrize("discipline", [Discipline.FIFO, Discipline.LIFO])
    @pytest.mark.parametrize("seed", range(6))
    def test_checked_and_plain_runs_agree(self, discipline, seed):
        scenario = random_scenario(np.random.default_rng(300 + seed))
        plain = run(scenario, Algorithm.PBP, discipline, 4.0, 1200, seed, check_twin=False)
        checked = run(scenario, Algorithm.PBP, discipline, 4.0, 1200, seed,
                      check_twin=True, strict=True, trace=True)
        assert np.array_equal(plain.q_sum, checked.q_sum)
        assert np.array_equal(plain.q_actual, checked.q_actual)
        assert np.array_equal(plain.costs, checked.costs)
        for key, values in plain.packet_log.arrays().items():
            assert np.array_equal(values, checked.packet_log.arrays()[key])

    def test_history_matches_the_slot_logs(self, downlink):
        result = run(downlink, Algorithm.PBP, Discipline.LIFO, 10.0, 300, 5, trace=True)
        assert [log.cost for log in result.slot_logs] == result.costs.tolist()
        assert [list(log.q_sum) for log in result.slot_logs] == result.q_sum.tolist()
        assert [list(log.q_actual) for log in result.slot_logs] == result.q_actual.tolist()

    @pytest.mark.parametrize("discipline", [Discipline.FIFO, Discipline.LIFO])
    def test_running_prediction_size(self, downlink, discipline):
        state = init(downlink, ArrivalSampler(downlink, 8), ChannelSampler(downlink, 8),
                     discipline=discipline, V=10.0)
        for _ in range(400):
            step(state)
            for bank in state.bank.users:
                assert bank.prediction_size == sum(bank.prediction)
                assert bank.q_sum == bank.actual_size + sum(bank.prediction)


class TestRuns:
    """Test suite for whole runs on the two-user preset"""

    def test_conservation(self, downlink):
        result = run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 3000, 4)
        for n in range(2):
            assert result.admitted[n] == result.served[n] + result.censored[n] + result.pending[n]

    def test_pending_packets_fill_the_window(self, downlink):
        """Arrivals of the next D slots are admitted but not yet due"""
        result = run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 500, 4)
        sampler = ArrivalSampler(downlink, 4)
        for n, window in enumerate(downlink.prediction):
            ahead = sum(sampler.user_at(n, k) for k in range(500, 500 + window))
            assert result.admitted[n] == sum(sampler.user_at(n, k) for k in range(500 + window))
            assert 0 <= result.pending[n] <= ahead

    def test_bp_equals_pbp_without_prediction(self, downlink):
        none = downlink.with_prediction([0, 0])
        pbp = run(none, Algorithm.PBP, Discipline.FIFO, 10.0, 2000, 9)
        bp = run(downlink, Algorithm.BP, Discipline.FIFO, 10.0, 2000, 9)
        assert np.array_equal(pbp.q_sum, bp.q_sum)
        assert np.array_equal(pbp.costs, bp.costs)

    def test_same_seed_same_run(self, downlink):
        a = run(downlink, Algorithm.PBP, Discipline.LIFO, 3.0, 1000, 2)
        b = run(downlink, Algorithm.PBP, Discipline.LIFO, 3.0, 1000, 2)
        assert np.array_equal(a.q_sum, b.q_sum)
        assert a.f_av == b.f_av

    def test_longer_run_extends_a_shorter_one(self, downlink):
        """The first slots do not depend on the horizon"""
        short = run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 400, 3)
        long = run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 900, 3)
        assert np.array_equal(short.q_sum, long.q_sum[:400])

    def test_burn_in_window(self, downlink):
        result = run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 1000, 1, burn_in_fraction=0.1)
        assert result.burn_in == 100
        assert result.q_sum_av == pytest.approx(result.q_sum[100:].sum(axis=1).mean())

    def test_trace_records_every_slot(self, downlink):
        result = run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 50, 1, trace=True)
        assert len(result.slot_logs) == 50
        first = result.slot_logs[0]
        assert first.q_sum == first.q_hat
        assert len(first.rates[1]) == 1 + 10

    def test_invalid_horizon(self, downlink):
        with pytest.raises(ConfigError):
            run(downlink, Algorithm.PBP, Discipline.FIFO, 10.0, 0, 1)

    def test_run_id(self):
        assert run_id(Algorithm.PBP, Discipline.FIFO, 10, (15, 30), 1) == "pbp_fifo_V10_D15-30_s1"
        assert run_id(Algorithm.BP, Discipline.LIFO, 0.5, (5, 10), 2, True) == "twin_lifo_V0.5_D5-10_s2"

    def test_invariant_error_is_runtime(self):
        assert SimulationInvariantError("x").exit_code == 2
