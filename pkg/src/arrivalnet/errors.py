"""Exception hierarchy shared by every module."""


class ArrivalNetError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ArrivalNetError, ValueError):
    """Operand shapes are incompatible."""


class ConfigError(ArrivalNetError, ValueError):
    """A configuration value is outside its admissible range."""


class ContractError(ArrivalNetError, ValueError):
    """A precondition of an operation was violated by its caller."""


class FormatError(ArrivalNetError, ValueError):
    """A file does not follow the expected on-disk format."""


class CorruptionError(FormatError):
    """Checksum verification failed."""


class NumericalError(ArrivalNetError, FloatingPointError):
    """A computation produced NaN or Inf."""
