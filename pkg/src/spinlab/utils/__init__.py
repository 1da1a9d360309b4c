"""
Utility modules for spinlab.
"""
from .config import ConfigManager, get_config, reset_config
from .logger import get_logger, setup_logger

__all__ = ["ConfigManager", "get_config", "reset_config", "get_logger", "setup_logger"]
