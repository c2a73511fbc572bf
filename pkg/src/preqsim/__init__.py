"""Discrete-time simulator for predictive backpressure scheduling."""

from .engine import RunResult, run
from .exceptions import (
    AnalysisError,
    ArtifactIOError,
    ConfigError,
    InfeasibleError,
    PreqsimError,
    SimulationInvariantError,
    TwinMismatchError,
)
from .presets import get_preset
from .scenario import Scenario, load_scenario, validate
from .scheduler import Algorithm, Discipline

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "AnalysisError",
    "ArtifactIOError",
    "ConfigError",
    "Discipline",
    "InfeasibleError",
    "PreqsimError",
    "RunResult",
    "Scenario",
    "SimulationInvariantError",
    "TwinMismatchError",
    "get_preset",
    "load_scenario",
    "run",
    "validate",
]
