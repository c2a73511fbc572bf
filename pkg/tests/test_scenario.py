"""
Tests for scenario validation, rate and cost rules, and the seeded samplers
"""

import json

import numpy as np
import pytest

from preqsim.exceptions import ConfigError, InvalidActionError
from preqsim.oracle import drift_constant
from preqsim.presets import get_preset, two_user_downlink, random_scenario
from preqsim.scenario import (
    ArrivalSampler,
    ChannelSampler,
    RngStream,
    ScriptedArrivals,
    cost,
    load_scenario,
    scenario_to_dict,
    service_rate,
    validate,
)


class TestValidation:
    """Test suite for turning raw documents into scenarios"""

    def test_preset_shape(self, downlink):
        """The built-in two-user preset has four states and five shared actions"""
        assert downlink.n_users == 2
        assert downlink.n_states == 4
        assert all(len(actions) == 5 for actions in downlink.action_sets)
        assert downlink.arrival_rates == pytest.approx((0.6, 1.0))
        assert downlink.prediction == (5, 10)

    def test_preset_bounds(self, downlink):
        """A_max = 3, mu_max = floor(ln 21) = 3, so B = 18"""
        assert downlink.bounds.a_max == 3
        assert downlink.bounds.mu_max == 3
        assert downlink.bounds.f_max == 10
        assert drift_constant(downlink) == 18

    def test_preset_notes_record_the_channel_assumption(self, downlink):
        assert any("uniform" in note for note in downlink.notes)

    @pytest.mark.parametrize(
        "state,action,expected",
        [
            ((1, 1), (5, 0), (1, 0)),
            ((1, 1), (10, 0), (2, 0)),
            ((2, 2), (10, 0), (3, 0)),
            ((2, 1), (0, 10), (0, 2)),
            ((1, 2), (0, 5), (0, 2)),
            ((2, 2), (0, 0), (0, 0)),
        ],
    )
    def test_floor_log_rates(self, downlink, state, action, expected):
        """mu_n = floor(ln(1 + S_n P_n))"""
        assert tuple(service_rate(downlink, state, action)) == expected

    def test_log_base_two(self):
        """floor(log2(1 + 5)) = 2 where the natural log gives 1"""
        scenario = two_user_downlink(log_base="2")
        assert tuple(service_rate(scenario, (1, 1), (5, 0))) == (2, 0)

    def test_cost_is_total_power(self, downlink):
        assert cost(downlink, (1, 2), (0, 10)) == 10
        assert cost(downlink, (1, 2), (0, 0)) == 0

    def test_unknown_action(self, downlink):
        """Actions outside the state's set are rejected"""
        with pytest.raises(InvalidActionError):
            service_rate(downlink, (1, 1), (5, 5))

    def test_unknown_state(self, downlink):
        with pytest.raises(InvalidActionError):
            cost(downlink, (3, 3), (0, 0))

    def test_probabilities_must_sum_to_one(self, scenario_doc):
        """The error names the offending field"""
        scenario_doc["arrivals"][0]["probs"] = [0.2, 0.7]
        with pytest.raises(ConfigError) as exc:
            validate(scenario_doc)
        assert exc.value.path == "arrivals.0.probs"
        assert "probabilities sum to 0.9" in str(exc.value)

    def test_negative_probability(self, scenario_doc):
        scenario_doc["channel"]["probs"] = [1.5, -0.5]
        with pytest.raises(ConfigError) as exc:
            validate(scenario_doc)
        assert exc.value.path == "channel.probs"

    def test_power_above_p_max(self, scenario_doc):
        scenario_doc["p_max"] = 4
        with pytest.raises(ConfigError) as exc:
            validate(scenario_doc)
        assert exc.value.path == "shared_actions.1"

    def test_non_integer_rate(self, scenario_doc):
        """A linear rule on a fractional channel gain is not a packet count"""
        scenario_doc["rate_fn"] = "linear"
        scenario_doc["channel"]["states"] = [[1.5, 1], [2, 2]]
        with pytest.raises(ConfigError) as exc:
            validate(scenario_doc)
        assert "non-integer rate" in str(exc.value)

    def test_wrong_prediction_length(self, scenario_doc):
        scenario_doc["prediction"] = [1]
        with pytest.raises(ConfigError) as exc:
            validate(scenario_doc)
        assert exc.value.path == "prediction"

    def test_exactly_one_action_source(self, scenario_doc):
        scenario_doc["actions"] = {"1,1": [[0, 0]], "2,2": [[0, 0]]}
        with pytest.raises(ConfigError):
            validate(scenario_doc)

    def test_per_state_actions(self, scenario_doc):
        """Action sets may differ between states"""
        del scenario_doc["shared_actions"]
        scenario_doc["actions"] = {"1,1": [[0, 0], [5, 0]], "2,2": [[0, 0], [0, 5], [5, 0]]}
        scenario = validate(scenario_doc)
        assert [len(a) for a in scenario.action_sets] == [2, 3]

    def test_missing_state_in_actions(self, scenario_doc):
        del scenario_doc["shared_actions"]
        scenario_doc["actions"] = {"1,1": [[0, 0]]}
        with pytest.raises(ConfigError) as exc:
            validate(scenario_doc)
        assert exc.value.path == "actions"

    def test_rate_tables_are_read_only(self, downlink):
        with pytest.raises(ValueError):
            downlink.rate_tables[0][0, 0] = 7

    def test_document_round_trip(self, downlink):
        """scenario_to_dict produces a document that validates to the same tables"""
        again = validate(scenario_to_dict(downlink))
        for a, b in zip(downlink.rate_tables, again.rate_tables):
            assert np.array_equal(a, b)
        assert again.arrival_rates == downlink.arrival_rates

    def test_with_prediction(self, downlink):
        wide = downlink.with_prediction([15, 30])
        assert wide.prediction == (15, 30)
        assert downlink.prediction == (5, 10)
        with pytest.raises(ConfigError):
            downlink.with_prediction([1])

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            get_preset("nope")


class TestLoading:
    """Test suite for scenario files"""

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError) as exc:
            load_scenario(tmp_path / "absent.json")
        assert exc.value.exit_code == 1

    def test_json_file(self, tmp_path, scenario_doc):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(scenario_doc))
        assert load_scenario(path).name == "doc"

    def test_yaml_file(self, tmp_path):
        path = tmp_path / "scenario.yml"
        path.write_text(
            "name: tiny\nusers: 1\n"
            "arrivals:\n  - {support: [0, 1], probs: [0.5, 0.5]}\n"
            "channel: {states: [[1]], probs: [1.0]}\n"
            "shared_actions: [[0], [2]]\n"
            "rate_fn: linear\nprediction: [3]\n"
        )
        scenario = load_scenario(path)
        assert scenario.rate_tables[0].tolist() == [[0], [2]]

    def test_unparsable_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_scenario(path)


class TestSamplers:
    """Test suite for the reproducible random streams"""

    def test_stream_is_reproducible(self, downlink):
        a = ArrivalSampler(downlink, seed=7, chunk=64)
        b = ArrivalSampler(downlink, seed=7, chunk=64)
        assert [a.user_at(1, k) for k in range(200)] == [b.user_at(1, k) for k in range(200)]

    def test_value_independent_of_access_order(self, downlink):
        """The k-th draw is the same whether or not earlier draws were read"""
        forward = ArrivalSampler(downlink, seed=3, chunk=16)
        values = [forward.user_at(0, k) for k in range(100)]
        jump = ArrivalSampler(downlink, seed=3, chunk=16)
        assert jump.user_at(0, 99) == values[99]

    def test_values_in_support(self, downlink):
        sampler = ArrivalSampler(downlink, seed=1)
        assert {sampler.user_at(0, k) for k in range(500)} <= {0, 3}
        assert {sampler.user_at(1, k) for k in range(500)} <= {0, 2}

    def test_empirical_rate(self, downlink):
        sampler = ArrivalSampler(downlink, seed=11)
        mean = np.mean([sampler.user_at(1, k) for k in range(20_000)])
        assert mean == pytest.approx(1.0, abs=0.05)

    @pytest.mark.parametrize("user,rate,sd", [(0, 0.6, 1.2), (1, 1.0, 1.0)])
    def test_long_run_mean_within_three_standard_errors(self, downlink, user, rate, sd):
        draws = 1_000_000
        sampler = ArrivalSampler(downlink, seed=2024)
        mean = np.mean([sampler.user_at(user, k) for k in range(draws)])
        assert abs(mean - rate) <= 3 * sd / np.sqrt(draws)

    def test_channel_frequencies_within_four_standard_errors(self, downlink):
        draws = 400_000
        channel = ChannelSampler(downlink, seed=2024)
        counts = np.bincount([channel.state_at(t) for t in range(draws)], minlength=4)
        se = np.sqrt(0.25 * 0.75 / draws)
        assert (np.abs(counts / draws - 0.25) <= 4 * se).all()

    def test_channel_states_cover_support(self, downlink):
        channel = ChannelSampler(downlink, seed=5)
        assert {channel.state_at(t) for t in range(400)} == {0, 1, 2, 3}

    def test_streams_differ_by_id(self):
        a = RngStream(1, 0).generator().integers(0, 1_000_000, size=8)
        b = RngStream(1, 1).generator().integers(0, 1_000_000, size=8)
        assert not np.array_equal(a, b)

    def test_scripted_arrivals_pad_with_zero(self):
        scripted = ScriptedArrivals([[2, 1]])
        assert [scripted.user_at(0, k) for k in range(4)] == [2, 1, 0, 0]


class TestRandomScenarios:
    """Test suite for the random small-system generator"""

    @pytest.mark.parametrize("seed", range(10))
    def test_random_scenarios_validate(self, seed):
        scenario = random_scenario(np.random.default_rng(seed))
        assert 1 <= scenario.n_users <= 3
        assert all(0 <= d <= 10 for d in scenario.prediction)
        # the zero action is always available
        for actions in scenario.action_sets:
            assert actions[0] == tuple([0.0] * scenario.n_users)
