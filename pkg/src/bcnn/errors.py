"""Exception hierarchy shared by all modules."""


class BCNNError(Exception):
    """Base class for engine errors."""


class ShapeError(BCNNError, ValueError):
    """Operand shapes do not fit the operation."""


class ConfigError(BCNNError, ValueError):
    """Invalid configuration value or degenerate input."""


class StateError(BCNNError, RuntimeError):
    """Objects that must belong together (model, trace, gradients) do not."""


class IngestionError(BCNNError):
    """Dataset directory or image could not be ingested."""


class IntegrityError(BCNNError):
    """A model file failed a magic, version, checksum or shape check."""


class EmptyDatasetError(IngestionError, ConfigError):
    """A dataset directory held no usable images."""
