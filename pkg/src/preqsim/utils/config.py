import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import BaseModel, Field, ValidationError

from ..exceptions import ConfigError
from .logger import sim_logger

try:
    from dotenv import load_dotenv
except ImportError:  # pragma: no cover
    load_dotenv = None


class SimulationSettings(BaseModel):
    burn_in_fraction: float = Field(0.1, ge=0.0, lt=1.0)
    check_twin: bool = True
    censored_warning_fraction: float = Field(0.001, ge=0.0)
    rng_chunk: int = Field(4096, gt=0)
    horizon: int = Field(500_000, ge=1)
    batches: int = Field(50, ge=2)


class RunnerSettings(BaseModel):
    threads: int = Field(4, ge=1)
    output_dir: str = "results"


class OracleSettings(BaseModel):
    gamma_grid_points: int = Field(21, ge=2)
    gamma_resolution: float = Field(1e-3, gt=0.0)
    max_cuts: int = Field(500, ge=1)
    tolerance: float = Field(1e-9, gt=0.0)


class LoggingSettings(BaseModel):
    level: str = "INFO"


class SimSettings(BaseModel):
    simulation: SimulationSettings = SimulationSettings()
    runner: RunnerSettings = RunnerSettings()
    oracle: OracleSettings = OracleSettings()
    logging: LoggingSettings = LoggingSettings()


ENV_OVERRIDES = {
    "PREQSIM_THREADS": ("runner", "threads"),
    "PREQSIM_OUTPUT_DIR": ("runner", "output_dir"),
    "PREQSIM_LOG_LEVEL": ("logging", "level"),
}


class SimConfig:
    def __init__(self, project_root: Optional[Path] = None):
        self._settings: Optional[SimSettings] = None
        # Use absolute paths from the project root
        self.project_root = project_root or Path(__file__).parent.parent.parent.parent

    def load_settings(self) -> SimSettings:
        """Load settings from conf/ (YAML), then apply PREQSIM_* environment overrides"""
        if self._settings is not None:
            return self._settings

        if load_dotenv is not None:
            load_dotenv(self.project_root / ".env")

        # Check for configuration files in order of preference
        config_files = [
            self.project_root / "conf/config.yml",
            self.project_root / "conf/config.yaml",
            self.project_root / "conf/config.example.yml",
        ]

        raw: Dict[str, Any] = {}
        for config_file in config_files:
            if config_file.exists():
                sim_logger.debug(f"Loading settings from {config_file}")
                try:
                    with open(config_file, "r") as f:
                        raw = yaml.safe_load(f) or {}
                except yaml.YAMLError as e:
                    raise ConfigError(f"invalid YAML: {e}", path=str(config_file))
                break
        else:
            sim_logger.debug("No settings file found, using built-in defaults")

        raw = self._apply_env(raw)
        self._settings = self._validate(raw)
        sim_logger.set_level(self._settings.logging.level)
        return self._settings

    def _apply_env(self, raw: Dict[str, Any]) -> Dict[str, Any]:
        merged = {section: dict(values or {}) for section, values in raw.items()}
        for env_var, (section, key) in ENV_OVERRIDES.items():
            value = os.getenv(env_var)
            if value:
                merged.setdefault(section, {})[key] = value
                sim_logger.debug(f"{env_var} overrides {section}.{key}")
        return merged

    @staticmethod
    def _validate(raw: Dict[str, Any]) -> SimSettings:
        try:
            return SimSettings.model_validate(raw)
        except ValidationError as e:
            first = e.errors()[0]
            path = ".".join(str(part) for part in first["loc"])
            raise ConfigError(first["msg"], path=path)

    def reload(self) -> SimSettings:
        """Reload settings from file"""
        self._settings = None
        return self.load_settings()

    def get_config(self) -> SimSettings:
        """Get current settings"""
        return self.load_settings()


# Global config instance
sim_config = SimConfig()
