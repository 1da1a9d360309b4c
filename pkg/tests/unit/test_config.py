"""
Tests for configuration loading, environment overrides and logging setup.
"""
import logging

import pytest

from spinlab.core.exceptions import ConfigurationError, StateCapError
from spinlab.core.graph import Graph
from spinlab.core.models import make_hardcore
from spinlab.oracle.exact import ExactOracle
from spinlab.utils.config import ConfigManager, get_config, reset_config
from spinlab.utils.logger import get_logger, set_level


def test_defaults_are_loaded(config_dir):
    """The shipped defaults are readable with dotted keys."""
    config = get_config()
    assert config.get_int("oracle.state_cap", 0) == 1 << 24
    assert config.get_float("coupling.sigma_slack", 0.0) == 4.0
    assert config.get("missing.key", "fallback") == "fallback"


def test_environment_overrides_yaml(config_dir, monkeypatch):
    monkeypatch.setenv("SPINLAB_EXPERIMENTS_CHUNK_SIZE", "17")
    assert get_config().get_int("experiments.chunk_size", 0) == 17


def test_state_cap_alias(config_dir, monkeypatch):
    """The short SPINLAB_STATE_CAP name caps enumeration."""
    monkeypatch.setenv("SPINLAB_STATE_CAP", "4")
    system = make_hardcore(Graph.path(3), 1.0)
    with pytest.raises(StateCapError):
        ExactOracle().enumerate(system)


def test_bad_integer_value(config_dir, monkeypatch):
    monkeypatch.setenv("SPINLAB_ORACLE_MATRIX_CAP", "lots")
    with pytest.raises(ConfigurationError):
        get_config().get_int("oracle.matrix_cap", 1)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        ConfigManager(str(tmp_path))


def test_set_in_memory(config_dir):
    config = get_config()
    config.set("dynamics.c_const", 8)
    assert config.get_float("dynamics.c_const", 0.0) == 8.0
    reset_config(str(config_dir))
    assert get_config().get_float("dynamics.c_const", 0.0) == 4.0


def test_logger_writes_to_stderr_once():
    logger = get_logger("spinlab.tests.logger")
    again = get_logger("spinlab.tests.logger")
    assert logger is again
    assert len(logger.handlers) >= 1
    assert not logger.propagate


def test_set_level_applies_to_spinlab_loggers(config_dir):
    logger = get_logger("spinlab.tests.level")
    set_level("DEBUG")
    assert logger.level == logging.DEBUG
    set_level("INFO")
    assert logger.level == logging.INFO
    with pytest.raises(ValueError):
        set_level("CHATTY")
