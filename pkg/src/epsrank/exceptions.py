"""Exception hierarchy shared by all epsrank modules."""


class EpsRankError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(EpsRankError, ValueError):
    """Array dimensions are inconsistent with the operation."""


class DomainError(EpsRankError, ValueError):
    """An argument lies outside the domain an operation accepts."""


class NumericError(EpsRankError, FloatingPointError):
    """A non-finite value appeared during a computation.

    ``layer`` is the hidden-layer index where it was first seen, when known.
    """

    def __init__(self, message, layer=None):
        super().__init__(message)
        self.layer = layer


class ConvergenceError(EpsRankError, RuntimeError):
    """An iterative routine hit its iteration cap."""


class UnsupportedActivationError(EpsRankError, ValueError):
    """The activation cannot provide the requested derivative order."""


class ConfigError(EpsRankError, ValueError):
    """An experiment or model configuration is invalid."""


class SelectionError(EpsRankError, RuntimeError):
    """No subset produced a numerically invertible block."""
