"""Exception types shared across the package."""


class SeqTagError(Exception):
    """Base class for every error this package raises on purpose."""


class DimensionError(SeqTagError, ValueError):
    """Operand shapes do not line up."""


class ConfigError(SeqTagError, ValueError):
    """Invalid configuration value or unknown option."""


class DataError(SeqTagError, ValueError):
    """Input data violates a corpus contract."""


class ParseError(DataError):
    """Structured input could not be parsed; the message names the location."""


class EvaluationError(SeqTagError, ValueError):
    """Metrics requested on data they are not defined for."""


class ModelIOError(SeqTagError):
    """Base class for model-file load failures."""


class ModelFormatError(ModelIOError):
    """File does not look like a model file at all."""


class ModelVersionError(ModelIOError):
    """Model file version is not supported by this reader."""


class ModelTruncatedError(ModelIOError):
    """Model file ends before its declared content does."""


class ModelChecksumError(ModelIOError):
    """Stored checksum does not match the file contents."""
