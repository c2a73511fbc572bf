"""Built-in scenarios: the two-user downlink experiment and random small systems."""

from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ConfigError
from .scenario import Scenario, validate
from .utils.logger import sim_logger

CHANNEL_ASSUMPTION_NOTE = (
    "channel distribution not given for this experiment; assumed S_1, S_2 i.i.d. "
    "uniform on {1, 2} (four joint states, probability 0.25 each)"
)


def log_base_note(log_base: str) -> str:
    return f"rate rule floor(log(1 + S*P)) evaluated with log base {log_base}"


def two_user_downlink_config(
    prediction: Sequence[int] = (5, 10), log_base: str = "e"
) -> Dict[str, Any]:
    """Two users, on/off arrivals, two channel levels, one active link per slot"""
    return {
        "name": "two_user_downlink",
        "users": 2,
        "arrivals": [
            {"support": [3, 0], "probs": [0.2, 0.8]},
            {"support": [2, 0], "probs": [0.5, 0.5]},
        ],
        "channel": {
            "states": [[1, 1], [1, 2], [2, 1], [2, 2]],
            "probs": [0.25, 0.25, 0.25, 0.25],
        },
        # P_1 * P_2 = 0 with P_n in {0, 5, 10}
        "shared_actions": [[0, 0], [5, 0], [10, 0], [0, 5], [0, 10]],
        "rate_fn": "floor_log",
        "log_base": log_base,
        "cost_fn": "total_power",
        "prediction": list(prediction),
        "p_max": 10,
        "notes": [CHANNEL_ASSUMPTION_NOTE, log_base_note(log_base)],
    }


def two_user_downlink(prediction: Sequence[int] = (5, 10), log_base: str = "e") -> Scenario:
    return validate(two_user_downlink_config(prediction, log_base))


PRESETS: Dict[str, Callable[..., Scenario]] = {
    "two_user_downlink": two_user_downlink,
    "paper_sec6": two_user_downlink,
}

# long-run LIFO zero-delay fractions reported for the two-user downlink at
# V = 10, D = (15, 30); reference values, see verify.verify_preset
LIFO_ZERO_DELAY_REFERENCE: Dict[str, Tuple[float, ...]] = {
    "two_user_downlink": (0.4762, 0.9289),
    "paper_sec6": (0.4762, 0.9289),
}


def get_preset(name: str, prediction: Optional[Sequence[int]] = None) -> Scenario:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; available: {sorted(PRESETS)}",
                          path="preset")
    scenario = PRESETS[name]()
    if prediction is not None:
        scenario = scenario.with_prediction(prediction)
    return scenario


def random_scenario_config(
    rng: np.random.Generator, max_users: int = 3, max_window: int = 10
) -> Dict[str, Any]:
    """A random small system with integral linear rates and finite action sets"""
    n = int(rng.integers(1, max_users + 1))
    arrivals = []
    for _ in range(n):
        size = int(rng.integers(1, 4))
        support = sorted(rng.choice(5, size=size, replace=False).tolist())
        weights = rng.random(size) + 0.05
        arrivals.append({"support": support, "probs": _normalized(weights)})

    n_states = min(int(rng.integers(1, 4)), 2**n)
    states = set()
    while len(states) < n_states:
        states.add(tuple(int(x) for x in rng.integers(1, 3, size=n)))
    states = sorted(states)

    actions = {}
    for state in states:
        n_actions = min(int(rng.integers(1, 5)), 3**n)
        action_list = [[0] * n]
        while len(action_list) < n_actions:
            candidate = [int(x) for x in rng.integers(0, 3, size=n)]
            if candidate not in action_list:
                action_list.append(candidate)
        actions[",".join(str(s) for s in state)] = action_list

    return {
        "name": "random",
        "users": n,
        "arrivals": arrivals,
        "channel": {
            "states": [list(s) for s in states],
            "probs": _normalized(rng.random(n_states) + 0.05),
        },
        "actions": actions,
        "rate_fn": "linear",
        "cost_fn": "total_power",
        "prediction": [int(d) for d in rng.integers(0, max_window + 1, size=n)],
    }


def random_scenario(
    rng: np.random.Generator, max_users: int = 3, max_window: int = 10
) -> Scenario:
    return validate(random_scenario_config(rng, max_users, max_window))


def _normalized(weights: np.ndarray) -> list:
    probs = [float(w) for w in weights / weights.sum()]
    # absorb rounding in the last entry so the sum is 1 within 1e-12
    probs[-1] = 1.0 - sum(probs[:-1])
    return probs


def log_assumptions(scenario: Scenario) -> None:
    """Warn about modelling assumptions recorded in the scenario's notes"""
    for note in scenario.notes:
        if note == CHANNEL_ASSUMPTION_NOTE:
            sim_logger.warning(f"'{scenario.name}': {note}")
        else:
            sim_logger.info(f"'{scenario.name}': {note}")
