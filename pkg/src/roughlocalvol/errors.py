"""Exception types raised by the estimation and simulation layers."""


class RoughLocalVolError(Exception):
    """Base class for package errors."""


class QuadratureError(RoughLocalVolError):
    """A quadrature did not converge to the requested tolerance."""


class FactorizationError(RoughLocalVolError):
    """Covariance factorization failed beyond the tolerance budget."""


class PriceDomainError(RoughLocalVolError, ValueError):
    """Option price outside the open no-arbitrage band."""


class ConvergenceError(RoughLocalVolError):
    """An iterative solver hit its iteration cap without converging.

    Carries the last iterate in ``last_iterate`` when available.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class DegenerateSupportError(RoughLocalVolError):
    """All kernel weights vanished at the requested strike."""


class UnstableEstimateError(RoughLocalVolError):
    """A ratio estimator denominator is statistically indistinguishable from zero."""


class ExtrapolationRangeError(RoughLocalVolError, ValueError):
    """Requested point lies outside the computed grid."""


class ConfigError(RoughLocalVolError, ValueError):
    """Invalid or unknown configuration keys."""
