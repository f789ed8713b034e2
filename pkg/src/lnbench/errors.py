from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration value; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field
        self.message = message


class DetectorLatchedError(ValueError):
    """Bias current at or above the critical current."""


class FitError(RuntimeError):
    """A fit did not converge or its input cannot identify the model."""


def require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ConfigError(field, message)
