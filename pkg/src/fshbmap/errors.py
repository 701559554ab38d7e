"""Exception types shared across the package."""


class FshbmapError(Exception):
    """Base class for all package errors."""


class InvalidInputError(FshbmapError, ValueError):
    """An argument is outside its valid domain (non-finite entries, bad spec)."""


class FormatError(InvalidInputError):
    """An input file (PGM image, measurement CSV) is malformed."""


class ShapeError(FshbmapError, ValueError):
    """Array dimensions are inconsistent."""


class NumericalError(FshbmapError, ArithmeticError):
    """A factorization failed or a loss evaluated to a non-finite value.

    Parameters
    ----------
    message : str
        Human readable description.
    min_pivot : float, optional
        Smallest pivot met by a failed Cholesky factorization, if known.
    """

    def __init__(self, message, min_pivot=None):
        super().__init__(message)
        self.min_pivot = min_pivot


class ConfigError(FshbmapError, ValueError):
    """An experiment configuration is malformed or incomplete."""
