"""Desk-scale laboratory for online adaptation of RL agents to injected novelties."""

from .errors import ConfigurationError, LogParseError, UsageError

__version__ = "0.1.0"

__all__ = ["ConfigurationError", "LogParseError", "UsageError", "__version__"]
