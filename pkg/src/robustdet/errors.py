"""Error taxonomy shared by the numerical modules.

Every failure mode raised on purpose by this package derives from
RobustDetError so callers can map the whole family to one exit path.
"""


class RobustDetError(Exception):
    """Base class for all deliberate failures in this package."""


class DimensionMismatch(RobustDetError):
    """Operands have incompatible shapes."""


class ZeroVector(RobustDetError):
    """A vector that must be nonzero has (numerically) zero norm."""


class NotHermitian(RobustDetError):
    """Matrix is not Hermitian within tolerance."""


class NotPositiveDefinite(RobustDetError):
    """Cholesky factorization hit a non-positive pivot."""


class NumericalInconsistency(RobustDetError):
    """A quantity that must be real carries a non-negligible imaginary part."""


class DegenerateSteering(RobustDetError):
    """Steering vector is zero or whitens to numerically nothing."""


class ParallelUV(RobustDetError):
    """Whitened perturbation direction is numerically parallel to steering."""


class InvalidZeta(RobustDetError):
    """Shape parameter zeta = (K+1)(1+eps)/N must exceed 1."""


class DomainError(RobustDetError):
    """Argument outside the mathematical domain of a special function."""


class RootBracketFailure(RobustDetError):
    """Root finder could not bracket a sign change."""


class NonMonotoneDetected(RobustDetError):
    """A curve required to be monotone is not, beyond tolerance."""


class InsufficientTrials(UserWarning):
    """Monte Carlo trial count is below the 100/pfa calibration protocol."""
