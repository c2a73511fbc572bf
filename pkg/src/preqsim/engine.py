"""
Slot-by-slot evolution of the predictive system.

Every user owns a bank of queues: the actual queue Q^(-1) and the prediction
queues Q^(0..D-1) holding the still-unserved arrivals of future slots. A twin
counter Q-hat follows the equivalent non-predictive queue and must equal
Q^sum at every slot.

Packets are tracked as runs of identical packets (same user, same arrival
slot), which keeps long horizons cheap without losing per-packet delays.
"""

import time
from array import array
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, Iterator, List, Optional, Protocol, Sequence, Tuple, cast

import numpy as np

from .exceptions import ConfigError, SimulationInvariantError, TwinMismatchError
from .scenario import Action, ArrivalSampler, ChannelSampler, Scenario, State
from .scheduler import (
    ActionTable,
    Algorithm,
    Discipline,
    RateAllocation,
    distribute_rates,
    is_fully_efficient,
)
from .utils.config import sim_config
from .utils.logger import sim_logger

TAIL_LENGTH = 10


class ArrivalSource(Protocol):
    def user_at(self, user: int, k: int) -> int: ...


class ChannelSource(Protocol):
    def state_at(self, t: int) -> int: ...


@dataclass(frozen=True)
class PacketRecord:
    user: int
    arrival_slot: int
    entered_actual: Optional[int]
    served_slot: Optional[int]
    delay: Optional[int]


class PacketLog:
    """Run-length packet log: each entry is `count` packets sharing one history."""

    def __init__(self):
        self.user = array("q")
        self.arrival = array("q")
        self.served = array("q")  # -1 for censored packets
        self.count = array("q")
        self.from_actual = array("b")

    def __len__(self) -> int:
        return len(self.count)

    def add(self, user: int, arrival: int, served: int, count: int, from_actual: bool):
        self.user.append(user)
        self.arrival.append(arrival)
        self.served.append(served)
        self.count.append(count)
        self.from_actual.append(1 if from_actual else 0)

    def add_censored(self, user: int, arrival: int, count: int, from_actual: bool):
        self.add(user, arrival, -1, count, from_actual)

    def arrays(self) -> Dict[str, np.ndarray]:
        served = np.array(self.served, dtype=np.int64)
        arrival = np.array(self.arrival, dtype=np.int64)
        return {
            "user": np.array(self.user, dtype=np.int64),
            "arrival_slot": arrival,
            "served_slot": served,
            "count": np.array(self.count, dtype=np.int64),
            "from_actual": np.array(self.from_actual, dtype=np.int8),
            "delay": np.maximum(served - arrival, 0),
        }

    def records(self) -> Iterator[PacketRecord]:
        """Expand the log into one record per packet"""
        for i in range(len(self)):
            served = self.served[i]
            arrival = self.arrival[i]
            entered = arrival + 1 if self.from_actual[i] else None
            for _ in range(self.count[i]):
                yield PacketRecord(
                    user=self.user[i],
                    arrival_slot=arrival,
                    entered_actual=entered,
                    served_slot=served if served >= 0 else None,
                    delay=max(served - arrival, 0) if served >= 0 else None,
                )


@dataclass
class UserBank:
    """
    Queues of one user. `depth` is the prediction window the bank exposes to the
    scheduler; `lead` is how far ahead the arrival stream is read. A predictive
    bank has depth == lead == D_n; the equivalent twin system has depth 0 and
    lead D_n.
    """

    depth: int
    lead: int
    actual: Deque[List[int]] = field(default_factory=deque)  # [arrival_slot, count]
    actual_size: int = 0
    prediction: Deque[int] = field(default_factory=deque)
    prediction_size: int = 0  # running sum of `prediction`
    q_hat: int = 0
    admitted: int = 0
    served: int = 0

    @property
    def q_sum(self) -> int:
        return self.actual_size + self.prediction_size

    def sizes(self) -> List[int]:
        return [self.actual_size, *self.prediction]


@dataclass
class PredictionQueueBank:
    users: List[UserBank]

    def q_sum(self) -> List[int]:
        return [bank.q_sum for bank in self.users]

    def q_actual(self) -> List[int]:
        return [bank.actual_size for bank in self.users]

    def q_hat(self) -> List[int]:
        return [bank.q_hat for bank in self.users]


@dataclass(frozen=True)
class SlotLog:
    slot: int
    state: State
    action: Action
    rates: Tuple[Tuple[int, ...], ...]
    cost: float
    q_sum: Tuple[int, ...]
    q_actual: Tuple[int, ...]
    q_hat: Tuple[int, ...]


class History:
    """Start-of-slot costs and queue sizes, flattened slot by slot"""

    def __init__(self):
        self.costs = array("d")
        self.q_sum = array("q")
        self.q_actual = array("q")

    def as_arrays(self, n_users: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            np.array(self.costs, dtype=float),
            np.array(self.q_sum, dtype=np.int64).reshape(-1, n_users),
            np.array(self.q_actual, dtype=np.int64).reshape(-1, n_users),
        )


@dataclass
class EngineState:
    scenario: Scenario
    algorithm: Algorithm
    discipline: Discipline
    V: float
    arrivals: ArrivalSource
    channel: ChannelSource
    bank: PredictionQueueBank
    packet_log: PacketLog
    table: ActionTable
    check_twin: bool = True
    strict: bool = False
    t: int = 0
    history: Optional[History] = None
    q_sum_tail: List[Deque[Tuple[int, int]]] = field(default_factory=list)


def init(
    scenario: Scenario,
    arrivals: ArrivalSource,
    channel: ChannelSource,
    algorithm: Algorithm = Algorithm.PBP,
    discipline: Discipline = Discipline.FIFO,
    V: float = 1.0,
    check_twin: bool = True,
    twin_system: bool = False,
    strict: bool = False,
) -> EngineState:
    """
    Q^(-1)(0) = 0 and Q^(d)(0) = A_n(d). The twin counter starts at the sum of
    the first D_n arrivals. With twin_system, a BP bank is preloaded with that
    backlog instead and reads arrivals D_n slots ahead.
    """
    if twin_system and algorithm != Algorithm.BP:
        raise ConfigError("the equivalent twin system is only defined for BP", path="algorithm")

    users = []
    for n, window in enumerate(scenario.prediction):
        if algorithm == Algorithm.PBP:
            bank = UserBank(depth=window, lead=window)
        else:
            bank = UserBank(depth=0, lead=window if twin_system else 0)
        for k in range(bank.lead):
            a = arrivals.user_at(n, k)
            bank.admitted += a
            bank.q_hat += a
            if bank.depth > 0:
                bank.prediction.append(a)
                bank.prediction_size += a
            elif a > 0:
                # twin arrival slot of real slot k is k - D_n
                bank.actual.append([k - bank.lead, a])
                bank.actual_size += a
        users.append(bank)

    state = EngineState(
        scenario=scenario,
        algorithm=algorithm,
        discipline=discipline,
        V=V,
        arrivals=arrivals,
        channel=channel,
        bank=PredictionQueueBank(users),
        packet_log=PacketLog(),
        table=ActionTable.build(scenario, V),
        check_twin=check_twin,
        strict=strict,
    )
    state.q_sum_tail = [deque([(0, bank.q_sum)], maxlen=TAIL_LENGTH) for bank in users]
    return state


def _serve_actual(
    bank: UserBank, amount: int, fifo: bool, t: int, user: int, log: PacketLog
) -> int:
    """Serve packets of Q^(-1) in discipline order; returns the unused rate"""
    actual = bank.actual
    while amount > 0 and actual:
        block = actual[0] if fifo else actual[-1]
        take = amount if amount < block[1] else block[1]
        log.add(user, block[0], t, take, True)
        block[1] -= take
        bank.actual_size -= take
        bank.served += take
        amount -= take
        if block[1] == 0:
            if fifo:
                actual.popleft()
            else:
                actual.pop()
    return amount


def _serve_window(
    bank: UserBank, amount: int, fifo: bool, t: int, user: int, log: PacketLog
) -> int:
    """Serve the prediction queues, Q^(0) upwards for FIFO; returns the unused rate"""
    prediction = bank.prediction
    offset = bank.depth - bank.lead
    indices = range(bank.depth) if fifo else range(bank.depth - 1, -1, -1)
    for i in indices:
        q = prediction[i]
        if q:
            take = amount if amount < q else q
            prediction[i] = q - take
            bank.prediction_size -= take
            bank.served += take
            log.add(user, t + i + offset, t, take, False)
            amount -= take
            if amount == 0:
                break
    return amount


def _serve(
    bank: UserBank, amount: int, fifo: bool, t: int, user: int, log: PacketLog
) -> None:
    """
    Greedy service in discipline order. Serves exactly min(rate, queue) per
    queue of the allocation distribute_rates would return.
    """
    if fifo:
        amount = _serve_actual(bank, amount, True, t, user, log)
        if amount and bank.prediction_size:
            _serve_window(bank, amount, True, t, user, log)
    else:
        if bank.prediction_size:
            amount = _serve_window(bank, amount, False, t, user, log)
        if amount:
            _serve_actual(bank, amount, False, t, user, log)


def _check_bank(bank: UserBank, user: int, t: int) -> None:
    if bank.actual_size < 0 or any(q < 0 for q in bank.prediction):
        raise SimulationInvariantError(f"negative queue for user {user} at slot {t}")
    if sum(block[1] for block in bank.actual) != bank.actual_size:
        raise SimulationInvariantError(
            f"packet list of Q^(-1) diverged from its count for user {user} at slot {t}"
        )
    if sum(bank.prediction) != bank.prediction_size:
        raise SimulationInvariantError(
            f"prediction window diverged from its count for user {user} at slot {t}"
        )


def _advance(state: EngineState, detailed: bool) -> Optional[SlotLog]:
    """
    One slot: observe, allocate, serve, then shift the window and admit
    A_n(t + D_n). Only a detailed slot builds the allocations and its SlotLog.
    """
    t = state.t
    users = state.bank.users
    log = state.packet_log
    fifo = state.discipline == Discipline.FIFO

    s = state.channel.state_at(t)
    q_sum = [user.actual_size + user.prediction_size for user in users]
    m = state.table.argmin(q_sum, s)
    mu = state.table.rates[s][m]

    history = state.history
    if history is not None:
        history.costs.append(state.table.costs[s][m])
        history.q_sum.extend(q_sum)
        history.q_actual.extend(user.actual_size for user in users)

    allocations: List[RateAllocation] = []
    if detailed:
        q_actual = [user.actual_size for user in users]
        q_hat = [user.q_hat for user in users]
        for user, total_mu in zip(users, mu):
            sizes = user.sizes()
            alloc = distribute_rates(total_mu, sizes, state.discipline)
            if state.strict and not is_fully_efficient(alloc, sizes, total_mu):
                raise SimulationInvariantError(
                    f"allocation {alloc.rates} for sizes {sizes} is not fully efficient"
                )
            allocations.append(alloc)

    for n, user in enumerate(users):
        total_mu = mu[n]
        if total_mu:
            _serve(user, total_mu, fifo, t, n, log)

        # shift and admit
        new = state.arrivals.user_at(n, t + user.lead)
        user.admitted += new
        if user.depth > 0:
            leftover = user.prediction.popleft()
            user.prediction.append(new)
            user.prediction_size += new - leftover
            if leftover:
                user.actual.append([t + user.depth - user.lead, leftover])
                user.actual_size += leftover
        elif new:
            user.actual.append([t, new])
            user.actual_size += new

        # twin update
        user.q_hat = (user.q_hat - total_mu if user.q_hat > total_mu else 0) + new

        if state.strict:
            _check_bank(user, n, t + 1)

    state.t = t + 1
    if state.check_twin:
        for n, user in enumerate(users):
            current = user.actual_size + user.prediction_size
            state.q_sum_tail[n].append((state.t, current))
            if current != user.q_hat:
                # earlier entries matched, so the Q-hat tail differs in the last one only
                q_hat_tail = list(state.q_sum_tail[n])[:-1] + [(state.t, user.q_hat)]
                raise TwinMismatchError(n, state.t, state.q_sum_tail[n], q_hat_tail)

    if not detailed:
        return None
    scenario = state.scenario
    return SlotLog(
        slot=t,
        state=scenario.states[s],
        action=scenario.action_sets[s][m],
        rates=tuple(a.rates for a in allocations),
        cost=state.table.costs[s][m],
        q_sum=tuple(q_sum),
        q_actual=tuple(q_actual),
        q_hat=tuple(q_hat),
    )


def step(state: EngineState) -> SlotLog:
    """Observe, allocate, serve, then shift the window and admit A_n(t + D_n)"""
    return cast(SlotLog, _advance(state, detailed=True))


@dataclass
class RunResult:
    """Raw output of one run: per-slot traces (start of slot) and the packet log"""

    algorithm: Algorithm
    discipline: Discipline
    V: float
    prediction: Tuple[int, ...]
    seed: int
    horizon: int
    burn_in: int
    twin_system: bool
    costs: np.ndarray
    q_sum: np.ndarray  # (T, N)
    q_actual: np.ndarray  # (T, N)
    packet_log: PacketLog
    admitted: Tuple[int, ...]
    served: Tuple[int, ...]
    censored: Tuple[int, ...]
    pending: Tuple[int, ...]
    elapsed_s: float
    slot_logs: Optional[List[SlotLog]] = None

    @property
    def window(self) -> slice:
        return slice(self.burn_in, self.horizon)

    @property
    def f_av(self) -> float:
        return float(self.costs[self.window].mean())

    @property
    def q_sum_av(self) -> float:
        return float(self.q_sum[self.window].sum(axis=1).mean())

    @property
    def q_actual_av(self) -> float:
        return float(self.q_actual[self.window].sum(axis=1).mean())

    def q_sum_histogram(self, user: int) -> np.ndarray:
        return np.bincount(self.q_sum[self.window, user])


def run_id(
    algorithm: Algorithm,
    discipline: Discipline,
    V: float,
    prediction: Sequence[int],
    seed: int,
    twin_system: bool = False,
) -> str:
    tag = "twin" if twin_system else algorithm.value
    windows = "-".join(str(d) for d in prediction)
    return f"{tag}_{discipline.value}_V{V:g}_D{windows}_s{seed}"


def run(
    scenario: Scenario,
    algorithm: Algorithm,
    discipline: Discipline,
    V: float,
    horizon: int,
    seed: int,
    check_twin: Optional[bool] = None,
    twin_system: bool = False,
    burn_in_fraction: Optional[float] = None,
    strict: bool = False,
    trace: bool = False,
    arrivals: Optional[ArrivalSource] = None,
    channel: Optional[ChannelSource] = None,
) -> RunResult:
    """Run `horizon` slots and collect traces, averages and the packet log"""
    if horizon < 1:
        raise ConfigError("horizon must be at least 1", path="T")
    if V < 0:
        raise ConfigError("V must be non-negative", path="V")
    settings = sim_config.get_config().simulation
    if check_twin is None:
        check_twin = settings.check_twin
    if burn_in_fraction is None:
        burn_in_fraction = settings.burn_in_fraction
    if arrivals is None:
        arrivals = ArrivalSampler(scenario, seed, settings.rng_chunk)
    if channel is None:
        channel = ChannelSampler(scenario, seed, settings.rng_chunk)

    name = run_id(algorithm, discipline, V, scenario.prediction, seed, twin_system)
    with sim_logger.time_run(name, algorithm.value, V, scenario.prediction, horizon) as start:
        state = init(
            scenario, arrivals, channel, algorithm, discipline, V,
            check_twin=check_twin, twin_system=twin_system, strict=strict,
        )
        state.history = History()
        slot_logs: Optional[List[SlotLog]] = [] if trace else None
        detailed = trace or strict

        for _ in range(horizon):
            slot = _advance(state, detailed)
            if slot_logs is not None and slot is not None:
                slot_logs.append(slot)
        costs, q_sum, q_actual = state.history.as_arrays(scenario.n_users)

        # censor what is left: Q^(-1) holds past arrivals, the window holds future ones
        censored, pending = [], []
        for n, user in enumerate(state.bank.users):
            for arrival, count in user.actual:
                state.packet_log.add_censored(n, arrival, count, True)
            offset = user.depth - user.lead
            for i, count in enumerate(user.prediction):
                if count:
                    state.packet_log.add_censored(n, horizon + i + offset, count, False)
            censored.append(user.actual_size)
            pending.append(sum(user.prediction))
            if user.admitted != user.served + user.actual_size + pending[-1]:
                raise SimulationInvariantError(
                    f"packet conservation violated for user {n}: admitted {user.admitted}, "
                    f"served {user.served}, censored {user.actual_size}, pending {pending[-1]}"
                )

        elapsed = time.perf_counter() - start
        result = RunResult(
            algorithm=algorithm,
            discipline=discipline,
            V=V,
            prediction=tuple(scenario.prediction),
            seed=seed,
            horizon=horizon,
            burn_in=int(horizon * burn_in_fraction),
            twin_system=twin_system,
            costs=costs,
            q_sum=q_sum,
            q_actual=q_actual,
            packet_log=state.packet_log,
            admitted=tuple(u.admitted for u in state.bank.users),
            served=tuple(u.served for u in state.bank.users),
            censored=tuple(censored),
            pending=tuple(pending),
            elapsed_s=elapsed,
            slot_logs=slot_logs,
        )
        sim_logger.log_run_done(name, elapsed, result.f_av, result.q_sum_av, result.q_actual_av)
    return result
