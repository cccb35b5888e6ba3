"""Configuration management for semantic robustness experiments."""

from .manager import ConfigManager
from .manager import ExperimentConfig

__all__ = ["ConfigManager", "ExperimentConfig"]
