"""Exception types shared across the workbench."""


class ConfigError(Exception):
    """Invalid configuration document, layout, or experiment setup."""


class DivergenceError(Exception):
    """Training produced a non-finite loss; the update was aborted."""

    def __init__(self, message: str, agent_id: int | None = None, updates: int | None = None):
        super().__init__(message)
        self.agent_id = agent_id
        self.updates = updates


class CheckpointError(Exception):
    """Checkpoint file is missing, truncated, or has a bad magic/version."""
