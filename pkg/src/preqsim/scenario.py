"""
System model: arrival and channel processes, power action sets, rate and cost
rules, and the validation that turns a raw configuration into an immutable
``Scenario``.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, ValidationError, field_validator, model_validator

from .exceptions import ArtifactIOError, ConfigError, InvalidActionError
from .utils.logger import sim_logger

PROB_TOL = 1e-12
INTEGER_TOL = 1e-9

State = Tuple[float, ...]
Action = Tuple[float, ...]


# ---------------------------------------------------------------------------
# Raw configuration (JSON / YAML scenario files)
# ---------------------------------------------------------------------------


def _check_probs(probs: List[float]) -> List[float]:
    if any(p < 0 for p in probs):
        raise ValueError(f"negative probability in {probs}")
    total = math.fsum(probs)
    if abs(total - 1.0) > PROB_TOL:
        raise ValueError(f"probabilities sum to {total:.12g}")
    return probs


class DistConfig(BaseModel):
    support: List[int]
    probs: List[float]

    @field_validator("probs")
    @classmethod
    def probs_form_a_distribution(cls, v: List[float]) -> List[float]:
        return _check_probs(v)

    @field_validator("support")
    @classmethod
    def support_is_valid(cls, v: List[int]) -> List[int]:
        if not v:
            raise ValueError("empty support")
        if len(set(v)) != len(v):
            raise ValueError(f"support values are not distinct: {v}")
        if any(x < 0 for x in v):
            raise ValueError(f"negative packet count in support {v}")
        return v

    @model_validator(mode="after")
    def lengths_match(self) -> "DistConfig":
        if len(self.support) != len(self.probs):
            raise ValueError(
                f"support has {len(self.support)} values but probs has {len(self.probs)}"
            )
        return self


class ChannelConfig(BaseModel):
    states: List[List[float]]
    probs: List[float]

    @field_validator("probs")
    @classmethod
    def probs_form_a_distribution(cls, v: List[float]) -> List[float]:
        return _check_probs(v)

    @model_validator(mode="after")
    def states_are_valid(self) -> "ChannelConfig":
        if len(self.states) != len(self.probs):
            raise ValueError(
                f"{len(self.states)} states but {len(self.probs)} probabilities"
            )
        keys = [tuple(s) for s in self.states]
        if len(set(keys)) != len(keys):
            raise ValueError("channel states are not distinct")
        return self


class ScenarioConfig(BaseModel):
    name: str = "custom"
    users: int
    arrivals: List[DistConfig]
    channel: ChannelConfig
    actions: Optional[Dict[str, List[List[float]]]] = None
    shared_actions: Optional[List[List[float]]] = None
    rate_fn: str = "floor_log"
    log_base: str = "e"
    cost_fn: str = "total_power"
    prediction: List[int]
    p_max: Optional[float] = None
    notes: List[str] = []

    @field_validator("users")
    @classmethod
    def users_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("at least one user is required")
        return v

    @field_validator("prediction")
    @classmethod
    def prediction_non_negative(cls, v: List[int]) -> List[int]:
        if any(d < 0 for d in v):
            raise ValueError(f"prediction windows must be non-negative: {v}")
        return v

    @field_validator("log_base")
    @classmethod
    def known_log_base(cls, v: str) -> str:
        if v not in LOG_FUNCTIONS:
            raise ValueError(f"log_base must be one of {sorted(LOG_FUNCTIONS)}")
        return v

    @model_validator(mode="after")
    def one_action_source(self) -> "ScenarioConfig":
        if (self.actions is None) == (self.shared_actions is None):
            raise ValueError("exactly one of 'actions' or 'shared_actions' is required")
        return self


# ---------------------------------------------------------------------------
# Rate and cost rules
# ---------------------------------------------------------------------------

LOG_FUNCTIONS: Dict[str, Callable[[float], float]] = {
    "e": math.log,
    "2": math.log2,
    "10": math.log10,
}


def _floor_log_rate(state: State, action: Action, log_base: str) -> List[float]:
    log = LOG_FUNCTIONS[log_base]
    return [float(math.floor(log(1.0 + s * p))) for s, p in zip(state, action)]


def _linear_rate(state: State, action: Action, log_base: str) -> List[float]:
    return [s * p for s, p in zip(state, action)]


def _total_power_cost(state: State, action: Action) -> float:
    return float(sum(action))


def _stability_cost(state: State, action: Action) -> float:
    return 0.0


RATE_RULES: Dict[str, Callable[[State, Action, str], List[float]]] = {
    "floor_log": _floor_log_rate,
    "linear": _linear_rate,
}

COST_RULES: Dict[str, Callable[[State, Action], float]] = {
    "total_power": _total_power_cost,
    "stability": _stability_cost,
}


# ---------------------------------------------------------------------------
# Validated model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DiscreteDist:
    support: Tuple[Any, ...]
    probs: Tuple[float, ...]

    @property
    def mean(self) -> float:
        return math.fsum(float(v) * p for v, p in zip(self.support, self.probs))

    @property
    def max_value(self) -> Any:
        return max(v for v, p in zip(self.support, self.probs) if p > 0)


@dataclass(frozen=True)
class Bounds:
    a_max: int
    p_max: float
    mu_max: int
    f_max: float


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    n_users: int
    arrival_procs: Tuple[DiscreteDist, ...]
    channel_proc: DiscreteDist
    action_sets: Tuple[Tuple[Action, ...], ...]
    rate_fn: str
    log_base: str
    cost_fn: str
    prediction: Tuple[int, ...]
    bounds: Bounds
    arrival_rates: Tuple[float, ...]
    # rate_tables[s][m, n] = mu_n(s_i, P_m); cost_tables[s][m] = f(s_i, P_m)
    rate_tables: Tuple[np.ndarray, ...] = field(repr=False)
    cost_tables: Tuple[np.ndarray, ...] = field(repr=False)
    notes: Tuple[str, ...] = ()

    @property
    def states(self) -> Tuple[State, ...]:
        return tuple(self.channel_proc.support)

    @property
    def state_probs(self) -> Tuple[float, ...]:
        return self.channel_proc.probs

    @property
    def n_states(self) -> int:
        return len(self.channel_proc.support)

    def state_index(self, state: Sequence[float]) -> int:
        key = tuple(float(s) for s in state)
        for idx, candidate in enumerate(self.channel_proc.support):
            if candidate == key:
                return idx
        raise InvalidActionError(f"state {list(state)} is not in the channel support")

    def action_index(self, state_idx: int, action: Sequence[float]) -> int:
        key = tuple(float(p) for p in action)
        try:
            return self.action_sets[state_idx].index(key)
        except ValueError:
            state = list(self.channel_proc.support[state_idx])
            raise InvalidActionError(
                f"action {list(action)} is not in the action set of state {state}"
            )

    def with_prediction(self, prediction: Sequence[int]) -> "Scenario":
        prediction = tuple(int(d) for d in prediction)
        if len(prediction) != self.n_users or any(d < 0 for d in prediction):
            raise ConfigError(
                f"expected {self.n_users} non-negative windows, got {list(prediction)}",
                path="prediction",
            )
        return replace(self, prediction=prediction)


def _parse_state_key(key: str) -> State:
    cleaned = key.strip().strip("[]()")
    try:
        return tuple(float(part) for part in cleaned.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse channel state key '{key}'", path="actions")


def _config_errors(e: ValidationError) -> ConfigError:
    first = e.errors()[0]
    path = ".".join(str(part) for part in first["loc"])
    message = first["msg"]
    if message.startswith("Value error, "):
        message = message[len("Value error, ") :]
    return ConfigError(message, path=path or None)


def validate(raw: Union[ScenarioConfig, Dict[str, Any]]) -> Scenario:
    """Check every model assumption and compute the derived bounds and rates"""
    if isinstance(raw, ScenarioConfig):
        config = raw
    else:
        try:
            config = ScenarioConfig.model_validate(raw)
        except ValidationError as e:
            raise _config_errors(e)

    n = config.users
    if len(config.arrivals) != n:
        raise ConfigError(f"expected {n} arrival processes", path="arrivals")
    if len(config.prediction) != n:
        raise ConfigError(f"expected {n} prediction windows", path="prediction")
    if config.rate_fn not in RATE_RULES:
        raise ConfigError(f"unknown rate rule '{config.rate_fn}'", path="rate_fn")
    if config.cost_fn not in COST_RULES:
        raise ConfigError(f"unknown cost rule '{config.cost_fn}'", path="cost_fn")

    states = [tuple(float(s) for s in state) for state in config.channel.states]
    for i, state in enumerate(states):
        if len(state) != n:
            raise ConfigError(f"state has {len(state)} coordinates, expected {n}",
                              path=f"channel.states.{i}")

    # Resolve the action list of every state
    if config.shared_actions is not None:
        per_state = [config.shared_actions for _ in states]
        action_path = ["shared_actions" for _ in states]
    else:
        by_state = {_parse_state_key(k): v for k, v in config.actions.items()}
        unknown = set(by_state) - set(states)
        if unknown:
            raise ConfigError(f"actions given for unknown states {sorted(unknown)}",
                              path="actions")
        per_state, action_path = [], []
        for state in states:
            if state not in by_state:
                raise ConfigError(f"no action set for state {list(state)}", path="actions")
            per_state.append(by_state[state])
            action_path.append(f"actions.{','.join(f'{s:g}' for s in state)}")

    coords = [p for actions in per_state for action in actions for p in action]
    p_max = config.p_max if config.p_max is not None else max(coords, default=0.0)

    action_sets: List[Tuple[Action, ...]] = []
    for actions, path in zip(per_state, action_path):
        if not actions:
            raise ConfigError("empty action set", path=path)
        checked = []
        for m, action in enumerate(actions):
            if len(action) != n:
                raise ConfigError(f"action has {len(action)} coordinates, expected {n}",
                                  path=f"{path}.{m}")
            if any(p < 0 or p > p_max for p in action):
                raise ConfigError(f"power coordinate outside [0, {p_max:g}]",
                                  path=f"{path}.{m}")
            checked.append(tuple(float(p) for p in action))
        action_sets.append(tuple(checked))

    # Exhaustive evaluation of the rate and cost rules
    rate_rule = RATE_RULES[config.rate_fn]
    cost_rule = COST_RULES[config.cost_fn]
    rate_tables, cost_tables = [], []
    for state, actions, path in zip(states, action_sets, action_path):
        rates = np.zeros((len(actions), n), dtype=np.int64)
        costs = np.zeros(len(actions), dtype=float)
        for m, action in enumerate(actions):
            values = rate_rule(state, action, config.log_base)
            for user, value in enumerate(values):
                if value < 0 or abs(value - round(value)) > INTEGER_TOL:
                    raise ConfigError(
                        f"non-integer rate output {value:g} for user {user}",
                        path=f"{path}.{m}",
                    )
                rates[m, user] = int(round(value))
            costs[m] = cost_rule(state, action)
            if costs[m] < 0:
                raise ConfigError(f"negative cost {costs[m]:g}", path=f"{path}.{m}")
        rates.setflags(write=False)
        costs.setflags(write=False)
        rate_tables.append(rates)
        cost_tables.append(costs)

    arrival_procs = tuple(
        DiscreteDist(tuple(d.support), tuple(d.probs)) for d in config.arrivals
    )
    bounds = Bounds(
        a_max=max(max(d.support) for d in arrival_procs),
        p_max=float(p_max),
        mu_max=int(max(int(t.max()) for t in rate_tables)),
        f_max=float(max(float(c.max()) for c in cost_tables)),
    )
    scenario = Scenario(
        name=config.name,
        n_users=n,
        arrival_procs=arrival_procs,
        channel_proc=DiscreteDist(tuple(states), tuple(config.channel.probs)),
        action_sets=tuple(action_sets),
        rate_fn=config.rate_fn,
        log_base=config.log_base,
        cost_fn=config.cost_fn,
        prediction=tuple(config.prediction),
        bounds=bounds,
        arrival_rates=tuple(d.mean for d in arrival_procs),
        rate_tables=tuple(rate_tables),
        cost_tables=tuple(cost_tables),
        notes=tuple(config.notes),
    )
    sim_logger.debug(
        f"Validated scenario '{scenario.name}': N={n}, {scenario.n_states} states, "
        f"lambda={list(scenario.arrival_rates)}, bounds={bounds}"
    )
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Load a scenario from a JSON or YAML file"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scenario file {path} not found")
    try:
        with open(path, "r", encoding="utf-8") as f:
            if path.suffix in (".yml", ".yaml"):
                raw = yaml.safe_load(f)
            else:
                raw = json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"cannot parse {path}: {e}")
    except OSError as e:
        raise ArtifactIOError(f"cannot read {path}: {e}")
    return validate(raw)


def scenario_to_dict(scenario: Scenario) -> Dict[str, Any]:
    """Inverse of validate(): the JSON scenario document of a validated scenario"""
    return {
        "name": scenario.name,
        "users": scenario.n_users,
        "arrivals": [
            {"support": list(d.support), "probs": list(d.probs)}
            for d in scenario.arrival_procs
        ],
        "channel": {
            "states": [list(s) for s in scenario.states],
            "probs": list(scenario.state_probs),
        },
        "actions": {
            ",".join(f"{s:g}" for s in state): [list(a) for a in actions]
            for state, actions in zip(scenario.states, scenario.action_sets)
        },
        "rate_fn": scenario.rate_fn,
        "log_base": scenario.log_base,
        "cost_fn": scenario.cost_fn,
        "prediction": list(scenario.prediction),
        "p_max": scenario.bounds.p_max,
        "notes": list(scenario.notes),
    }


def service_rate(scenario: Scenario, state: Sequence[float], action: Sequence[float]) -> np.ndarray:
    """mu_n(S, P) for every user"""
    s = scenario.state_index(state)
    m = scenario.action_index(s, action)
    return scenario.rate_tables[s][m].copy()


def cost(scenario: Scenario, state: Sequence[float], action: Sequence[float]) -> float:
    """f(S, P)"""
    s = scenario.state_index(state)
    m = scenario.action_index(s, action)
    return float(scenario.cost_tables[s][m])


# ---------------------------------------------------------------------------
# Random number streams and samplers
# ---------------------------------------------------------------------------

CHANNEL_STREAM = 0


def arrival_stream(user: int) -> int:
    return 1 + user


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))


class StreamBuffer:
    """The k-th draw of a discrete distribution, drawn in fixed-size chunks"""

    def __init__(self, dist: DiscreteDist, stream: RngStream, chunk: int = 4096):
        self._gen = stream.generator()
        self._values = np.asarray(dist.support)
        self._probs = np.asarray(dist.probs, dtype=float)
        self._chunk = chunk
        self._chunks: List[list] = []

    def __getitem__(self, k: int):
        block, offset = divmod(k, self._chunk)
        if block < len(self._chunks):
            return self._chunks[block][offset]
        while len(self._chunks) <= block:
            idx = self._gen.choice(len(self._values), size=self._chunk, p=self._probs)
            self._chunks.append(self._values[idx].tolist())
        return self._chunks[block][offset]


class ArrivalSampler:
    """Independent per-user arrival streams; A_n(k) is reproducible from (seed, n, k)"""

    def __init__(self, scenario: Scenario, seed: int, chunk: int = 4096):
        self.n_users = scenario.n_users
        self._buffers = [
            StreamBuffer(dist, RngStream(seed, arrival_stream(n)), chunk)
            for n, dist in enumerate(scenario.arrival_procs)
        ]

    def user_at(self, user: int, k: int) -> int:
        return self._buffers[user][k]

    def at(self, t: int) -> np.ndarray:
        return np.array([self.user_at(n, t) for n in range(self.n_users)], dtype=np.int64)


class ScriptedArrivals:
    """Fixed arrival sequences (zero after the end), for traces and tests"""

    def __init__(self, sequences: Sequence[Sequence[int]]):
        self.n_users = len(sequences)
        self._sequences = [list(seq) for seq in sequences]

    def user_at(self, user: int, k: int) -> int:
        seq = self._sequences[user]
        return int(seq[k]) if k < len(seq) else 0

    def at(self, t: int) -> np.ndarray:
        return np.array([self.user_at(n, t) for n in range(self.n_users)], dtype=np.int64)


class ChannelSampler:
    def __init__(self, scenario: Scenario, seed: int, chunk: int = 4096):
        index_dist = DiscreteDist(tuple(range(scenario.n_states)), scenario.state_probs)
        self._buffer = StreamBuffer(index_dist, RngStream(seed, CHANNEL_STREAM), chunk)

    def state_at(self, t: int) -> int:
        return self._buffer[t]


class ScriptedChannel:
    def __init__(self, state_indices: Sequence[int]):
        self._indices = list(state_indices)

    def state_at(self, t: int) -> int:
        return self._indices[t % len(self._indices)]


def sample_arrivals(scenario: Scenario, rng: ArrivalSampler, t: int) -> np.ndarray:
    """A(t): one independent draw per user, deterministic given (seed, stream, t)"""
    return rng.at(t)
