"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An environment, novelty, or experiment configuration is invalid."""


class UsageError(RuntimeError):
    """An operation was called outside its contract (wrong schema, terminal state, ...)."""


class LogParseError(ValueError):
    """A run log could not be parsed."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno
