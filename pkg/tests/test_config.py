"""
Tests for settings loading: defaults, YAML files and environment overrides
"""

import os
from unittest.mock import patch

import pytest

from preqsim.exceptions import ConfigError
from preqsim.utils.config import SimConfig, sim_config


@pytest.fixture
def clean_env(monkeypatch):
    for name in ("PREQSIM_THREADS", "PREQSIM_OUTPUT_DIR", "PREQSIM_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)


@pytest.mark.usefixtures("clean_env")
class TestSimConfig:
    """Test suite for SimConfig"""

    def test_defaults_without_files(self, tmp_path):
        settings = SimConfig(project_root=tmp_path).get_config()
        assert settings.simulation.burn_in_fraction == 0.1
        assert settings.simulation.horizon == 500_000
        assert settings.simulation.check_twin is True
        assert settings.runner.threads == 4
        assert settings.oracle.gamma_grid_points == 21

    def test_yaml_overrides(self, tmp_path):
        (tmp_path / "conf").mkdir()
        (tmp_path / "conf" / "config.yml").write_text(
            "simulation:\n  horizon: 1000\nrunner:\n  output_dir: out\n"
        )
        settings = SimConfig(project_root=tmp_path).get_config()
        assert settings.simulation.horizon == 1000
        assert settings.runner.output_dir == "out"
        # untouched sections keep their defaults
        assert settings.oracle.tolerance == 1e-9

    def test_config_yml_wins_over_example(self, tmp_path):
        (tmp_path / "conf").mkdir()
        (tmp_path / "conf" / "config.example.yml").write_text("runner:\n  threads: 2\n")
        (tmp_path / "conf" / "config.yml").write_text("runner:\n  threads: 3\n")
        assert SimConfig(project_root=tmp_path).get_config().runner.threads == 3

    def test_environment_overrides(self, tmp_path):
        with patch.dict(os.environ, {"PREQSIM_THREADS": "7", "PREQSIM_OUTPUT_DIR": "/tmp/x"}):
            settings = SimConfig(project_root=tmp_path).get_config()
        assert settings.runner.threads == 7
        assert settings.runner.output_dir == "/tmp/x"

    def test_dotenv_file(self, tmp_path):
        (tmp_path / ".env").write_text("PREQSIM_THREADS=5\n")
        with patch.dict(os.environ, {}):
            settings = SimConfig(project_root=tmp_path).get_config()
        assert settings.runner.threads == 5

    def test_invalid_value_names_its_field(self, tmp_path):
        (tmp_path / "conf").mkdir()
        (tmp_path / "conf" / "config.yml").write_text("simulation:\n  burn_in_fraction: 1.5\n")
        with pytest.raises(ConfigError) as exc:
            SimConfig(project_root=tmp_path).get_config()
        assert exc.value.path == "simulation.burn_in_fraction"

    def test_invalid_environment_value(self, tmp_path):
        with patch.dict(os.environ, {"PREQSIM_THREADS": "many"}):
            with pytest.raises(ConfigError) as exc:
                SimConfig(project_root=tmp_path).get_config()
        assert exc.value.path == "runner.threads"

    def test_unparsable_yaml(self, tmp_path):
        (tmp_path / "conf").mkdir()
        (tmp_path / "conf" / "config.yml").write_text("simulation: [unclosed\n")
        with pytest.raises(ConfigError):
            SimConfig(project_root=tmp_path).get_config()

    def test_settings_are_cached_until_reload(self, tmp_path):
        (tmp_path / "conf").mkdir()
        path = tmp_path / "conf" / "config.yml"
        path.write_text("runner:\n  threads: 2\n")
        config = SimConfig(project_root=tmp_path)
        assert config.get_config().runner.threads == 2
        path.write_text("runner:\n  threads: 6\n")
        assert config.get_config().runner.threads == 2
        assert config.reload().runner.threads == 6

    def test_repository_example_is_valid(self):
        """The shipped conf/config.example.yml loads cleanly"""
        settings = SimConfig().reload()
        assert settings.logging.level == "INFO"
        assert sim_config.get_config().simulation.batches == 50
