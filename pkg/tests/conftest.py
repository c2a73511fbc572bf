import pytest

from preqsim.presets import two_user_downlink
from preqsim.scenario import Scenario


@pytest.fixture(scope="session")
def downlink() -> Scenario:
    return two_user_downlink()


@pytest.fixture
def scenario_doc():
    """A valid raw two-user scenario document, fresh per test"""
    return {
        "name": "doc",
        "users": 2,
        "arrivals": [
            {"support": [3, 0], "probs": [0.2, 0.8]},
            {"support": [2, 0], "probs": [0.5, 0.5]},
        ],
        "channel": {"states": [[1, 1], [2, 2]], "probs": [0.5, 0.5]},
        "shared_actions": [[0, 0], [5, 0], [0, 5]],
        "rate_fn": "floor_log",
        "cost_fn": "total_power",
        "prediction": [1, 2],
    }
