"""Exception types shared across the package."""


class LsrlError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LsrlError, ValueError):
    """Invalid configuration: bad track geometry, bad network config, bad flags."""


class ShapeMismatch(LsrlError, ValueError):
    """Operands with incompatible shapes; message names both shapes."""


class ProtocolError(LsrlError, RuntimeError):
    """API misuse, e.g. stepping a finished episode without reset."""


class UsageError(LsrlError, ValueError):
    """Operation called with unusable inputs (empty dataset, missing grad)."""


class NumericError(LsrlError, ArithmeticError):
    """Non-finite values where finite ones are required."""


class DataCorruption(LsrlError, ValueError):
    """On-disk artifact fails its integrity checks."""


class CheckpointFormatError(DataCorruption):
    """Checkpoint magic or version not recognized."""


class TensorNameMismatch(LsrlError, KeyError):
    """Checkpoint tensors do not line up with the target model's parameters."""
