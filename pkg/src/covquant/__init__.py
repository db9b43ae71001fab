"""Covariant integral quantization in a truncated number basis and on the half-line."""

__version__ = "0.1.0"

from .errors import (ConfigError, GridTooCoarse, GridUnderresolved, NumericalQualityError,
                     QuadratureUnstable, ValidationError)
from .quadrature import PhaseGrid

__all__ = [
    "__version__",
    "ConfigError",
    "ValidationError",
    "NumericalQualityError",
    "GridTooCoarse",
    "GridUnderresolved",
    "QuadratureUnstable",
    "PhaseGrid",
]
