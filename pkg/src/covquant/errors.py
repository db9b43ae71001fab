"""Exception types raised across the package.

The CLI maps these onto exit codes: configuration problems are
``ConfigError`` (2), numerical-quality failures derive from
``NumericalQualityError`` (3), validation failures are ``ValidationError`` (4).
"""


class QuantizationError(Exception):
    """Base class for every error raised by covquant."""


class ConfigError(QuantizationError, ValueError):
    pass


class ValidationError(QuantizationError, ValueError):
    pass


class NumericalQualityError(QuantizationError, ArithmeticError):
    pass


class NonConvergence(NumericalQualityError):
    pass


class GridTooCoarse(NumericalQualityError):
    pass


class QuadratureUnstable(NumericalQualityError):
    pass


class GridUnderresolved(NumericalQualityError):
    pass


class NonAbsolutelyConvergent(QuantizationError, ValueError):
    """The weight lies outside the class for which the kernel integral converges."""


class MissingDerivatives(QuantizationError, ValueError):
    pass


class NotDensity(ValidationError):
    pass


class UnsupportedProbe(QuantizationError, ValueError):
    pass


class RankCapExceeded(QuantizationError, ValueError):
    pass


class InterpolationOutOfRange(QuantizationError, ValueError):
    pass
