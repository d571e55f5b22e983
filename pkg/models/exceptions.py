"""
Exceptions raised by the denoising toolkit
"""


class DenoiseError(Exception):
    """Base class for toolkit errors"""
    pass


class InvalidParameterError(DenoiseError, ValueError):
    """A parameter is outside its admissible range"""
    pass


class DomainError(InvalidParameterError):
    """A scalar argument lies outside the function's domain"""
    pass


class SingularCutoffError(InvalidParameterError):
    """Butterworth-family filters are undefined for omega = 1"""
    pass


class DimensionMismatchError(DenoiseError, ValueError):
    """Vector or image shapes do not agree"""
    pass


class CapacityError(DenoiseError):
    """A dense or eigendecomposition capacity cap was exceeded"""

    def __init__(self, message: str, n: int, cap: int):
        super().__init__(message)
        self.n = n
        self.cap = cap


class DegenerateImageError(DenoiseError):
    """The image has zero intensity variance"""
    pass


class DegenerateOperatorError(DenoiseError):
    """The filtered operator annihilates every probe vector"""
    pass


class EvaluationError(DenoiseError):
    """A filter produced a non-finite value"""
    pass


class ContractViolationError(DenoiseError):
    """An input violated a structural precondition (e.g. symmetry)"""
    pass


class ImageFormatError(DenoiseError):
    """The image file could not be read or written"""
    pass
