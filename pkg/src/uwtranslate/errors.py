"""Exception hierarchy for uwtranslate.

All errors derive from ValueError so callers can keep catching ValueError.
The CLI maps each class to a process exit code.
"""


class UwtError(ValueError):
    """Base class for uwtranslate errors."""

    exit_code = 1


class ConfigError(UwtError):
    """Invalid configuration, override, or CLI argument."""

    exit_code = 2


class DataError(UwtError):
    """Dataset layout, pairing, or raster problems."""

    exit_code = 3


class CheckpointError(UwtError):
    """Checkpoint archive is corrupt or incompatible with the requested use."""

    exit_code = 4


class MetricError(UwtError):
    """A score cannot be computed from the given statistics."""
