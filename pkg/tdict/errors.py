"""
Exception hierarchy for tdict.

Validation errors mean the caller handed us something unusable (exit code 1
from the CLI); numerical errors mean a computation went wrong (exit code 2).
"""


class TdictError(Exception):
    """Base class for all tdict errors."""


class ValidationError(TdictError, ValueError):
    """Invalid input, configuration or file."""


class NumericalError(TdictError, ArithmeticError):
    """A numerical kernel failed or produced an inconsistent result."""


# Validation
class InvalidTensor(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class RankOutOfRange(ValidationError):
    pass


class InsufficientData(ValidationError):
    pass


class PatchTooLarge(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class EmptyMask(ValidationError):
    """No observed rows left in a masked coding problem."""


class TensorFormatError(ValidationError):
    pass


class UnsupportedFormat(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


# Numerical
class SymmetryViolation(NumericalError):
    """Inverse FFT left an imaginary residue above tolerance."""


class DecompositionError(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass
