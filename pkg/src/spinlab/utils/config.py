"""
Configuration management for spinlab.

Values come from ``config/default.yaml``; any key can be overridden from the
environment (or a ``.env`` file) using ``key.upper().replace('.', '_')``,
prefixed with ``SPINLAB_``.  ``oracle.state_cap`` is read from
``SPINLAB_ORACLE_STATE_CAP`` or the shorter ``SPINLAB_STATE_CAP``.
"""
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

from ..core.exceptions import ConfigurationError

ENV_PREFIX = "SPINLAB_"
ENV_ALIASES = {"oracle.state_cap": "SPINLAB_STATE_CAP"}

DEFAULT_CONFIG_DIR = Path(__file__).resolve().parents[3] / "config"


class ConfigManager:
    def __init__(self, config_dir: Optional[str] = None):
        """Initialize the configuration manager."""
        self.config_dir = Path(config_dir) if config_dir else DEFAULT_CONFIG_DIR
        self.config: Dict[str, Any] = {}

        self._load_env()
        self.load_config()

    def _load_env(self) -> None:
        """Load environment variables from a .env file when one exists."""
        env_path = Path(".env")
        if env_path.exists():
            load_dotenv(env_path)

    def load_config(self, config_file: str = "default.yaml") -> None:
        """Load configuration from YAML file."""
        config_path = self.config_dir / config_file
        if not config_path.exists():
            raise ConfigurationError(
                f"Configuration file not found: {config_path}",
                {"path": str(config_path)},
            )

        with open(config_path, "r") as f:
            self.config = yaml.safe_load(f) or {}

    @staticmethod
    def _env_keys(key: str) -> list:
        keys = [ENV_PREFIX + key.upper().replace(".", "_")]
        if key in ENV_ALIASES:
            keys.append(ENV_ALIASES[key])
        return keys

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value, checking environment variables first.

        Environment values are parsed with YAML so numbers and booleans keep
        their types.
        """
        for env_key in self._env_keys(key):
            env_value = os.getenv(env_key)
            if env_value is not None:
                try:
                    return yaml.safe_load(env_value)
                except yaml.YAMLError as e:
                    raise ConfigurationError(
                        f"Unparseable value for {env_key}: {env_value!r}",
                        {"key": key},
                    ) from e

        keys = key.split(".")
        value: Any = self.config
        for k in keys:
            if isinstance(value, dict):
                value = value.get(k, default)
            else:
                return default
        return value

    def get_int(self, key: str, default: int) -> int:
        value = self.get(key, default)
        try:
            return int(value)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"{key} must be an integer, got {value!r}") from e

    def get_float(self, key: str, default: float) -> float:
        value = self.get(key, default)
        try:
            return float(value)
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"{key} must be a number, got {value!r}") from e

    def set(self, key: str, value: Any) -> None:
        """Set a configuration value in memory using dot notation."""
        keys = key.split(".")
        config = self.config
        for k in keys[:-1]:
            config = config.setdefault(k, {})
        config[keys[-1]] = value

    def get_all(self) -> Dict[str, Any]:
        """Get all configuration values, including SPINLAB_ environment overrides."""
        config = dict(self.config)
        for key, value in os.environ.items():
            if key.startswith(ENV_PREFIX):
                config[key.lower()] = value
        return config


_config: Optional[ConfigManager] = None


def get_config() -> ConfigManager:
    """Return the process-wide configuration, loading it on first use."""
    global _config
    if _config is None:
        _config = ConfigManager()
    return _config


def reset_config(config_dir: Optional[str] = None) -> ConfigManager:
    """Reload configuration (used by the CLI ``--config`` flag and by tests)."""
    global _config
    _config = ConfigManager(config_dir)
    return _config
