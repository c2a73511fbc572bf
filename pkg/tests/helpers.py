"""Scenario builders shared by the test suites"""

import os
from typing import Sequence

from preqsim.engine import RunResult, run
from preqsim.scenario import Scenario, ScriptedArrivals, ScriptedChannel, validate
from preqsim.scheduler import Algorithm, Discipline

ACCEPTANCE = os.getenv("PREQSIM_ACCEPTANCE") == "1"


def constant_rate_scenario(
    rate: int = 1,
    prediction: Sequence[int] = (2,),
    support: Sequence[int] = (0, 1, 2, 3),
) -> Scenario:
    """One user, one channel state and a single action serving `rate` packets per slot"""
    return validate(
        {
            "name": "constant_rate",
            "users": 1,
            "arrivals": [{"support": list(support), "probs": [1.0 / len(support)] * len(support)}],
            "channel": {"states": [[1]], "probs": [1.0]},
            "shared_actions": [[rate]],
            "rate_fn": "linear",
            "cost_fn": "total_power",
            "prediction": list(prediction),
        }
    )


def deterministic_arrivals_scenario(
    arrivals: Sequence[int], actions, states=((1,),), prediction: Sequence[int] = (0,)
) -> Scenario:
    """Users with constant arrivals (lambda_n = arrivals[n]); one action list for every state"""
    n = len(arrivals)
    return validate(
        {
            "name": "deterministic",
            "users": n,
            "arrivals": [{"support": [a], "probs": [1.0]} for a in arrivals],
            "channel": {
                "states": [list(s) for s in states],
                "probs": [1.0 / len(states)] * len(states),
            },
            "shared_actions": [list(a) for a in actions],
            "rate_fn": "linear",
            "cost_fn": "total_power",
            "prediction": list(prediction),
        }
    )


TRACE_ARRIVALS = [[2, 1, 0, 3, 0]]


def scripted_run(rate, discipline=Discipline.FIFO, algorithm=Algorithm.PBP, **kwargs) -> RunResult:
    """Seven slots of the hand-checked trace: D = 2, arrivals (2, 1, 0, 3, 0), one channel state"""
    scenario = constant_rate_scenario(rate=rate, prediction=(2,))
    return run(
        scenario,
        algorithm,
        discipline,
        V=0.0,
        horizon=7,
        seed=0,
        burn_in_fraction=0.0,
        strict=True,
        arrivals=ScriptedArrivals(TRACE_ARRIVALS),
        channel=ScriptedChannel([0]),
        **kwargs,
    )
