"""Error types raised across preqsim.

Each error carries the process exit code the CLI reports for it, the same way
an HTTP error carries its status code.
"""

from typing import Optional, Sequence, Tuple


class PreqsimError(Exception):
    exit_code = 2

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ConfigError(PreqsimError):
    """Invalid scenario, plan or settings. Message is prefixed by the field path."""

    exit_code = 1

    def __init__(self, detail: str, path: Optional[str] = None):
        super().__init__(f"{path}: {detail}" if path else detail)
        self.path = path


class InfeasibleError(ConfigError):
    """No stationary randomized policy meets every arrival rate."""

    def __init__(self, detail: str, users: Sequence[int] = ()):
        super().__init__(detail)
        self.users = list(users)


class InvalidActionError(ConfigError):
    pass


class SimulationInvariantError(PreqsimError):
    exit_code = 2


class TwinMismatchError(SimulationInvariantError):
    def __init__(
        self,
        user: int,
        slot: int,
        q_sum_tail: Sequence[Tuple[int, int]],
        q_hat_tail: Sequence[Tuple[int, int]],
    ):
        detail = (
            f"twin mismatch for user {user} at slot {slot}: "
            f"Q^sum tail {list(q_sum_tail)} vs Q-hat tail {list(q_hat_tail)}"
        )
        super().__init__(detail)
        self.user = user
        self.slot = slot
        self.q_sum_tail = list(q_sum_tail)
        self.q_hat_tail = list(q_hat_tail)


class AnalysisError(PreqsimError):
    exit_code = 2


class ArtifactIOError(PreqsimError):
    exit_code = 3
