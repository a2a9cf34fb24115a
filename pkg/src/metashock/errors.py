"""Exception types raised across the package.

Every failure mode that callers are expected to handle gets its own class so
that the CLI can map them onto exit codes and tests can assert on them
precisely.  All of them derive from :class:`MetashockError`.
"""

from __future__ import annotations


class MetashockError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MetashockError):
    """A run configuration file is malformed or inconsistent."""


class DirectionMismatch(MetashockError):
    """Requested monotonicity contradicts the boundary data ordering."""


class GapViolation(MetashockError):
    """The flux oscillation is too large for the requested diffusion scale.

    Raised when ``M - m >= epsilon``; no connecting profile can exist and
    the limiting threshold length is undefined.
    """


class OutOfRange(MetashockError):
    """An integration constant lies outside its admissible open interval."""


class NoRoot(MetashockError):
    """A bracketing root solve found no sign change in the search interval."""


class NewtonDivergence(MetashockError):
    """Newton iteration failed to reduce the residual below tolerance.

    When raised from a time stepper the partially completed trajectory is
    attached as ``partial_trajectory`` for post-mortem inspection (``None``
    when the failure happened before any state was accepted).
    """

    def __init__(self, message: str, partial_trajectory=None):
        super().__init__(message)
        self.partial_trajectory = partial_trajectory


class ExplicitCFLViolation(MetashockError):
    """An explicit step was requested with a time step above the stable cap."""


class NoCrossing(MetashockError):
    """The field has no sign change, so no interface position is defined."""


class MultipleCrossings(MetashockError):
    """The field changes sign more than once under the strict policy.

    The number of crossings found is attached as ``count``.
    """

    def __init__(self, message: str, count: int):
        super().__init__(message)
        self.count = count


class XiOutOfRange(MetashockError):
    """An interface location lies outside the admissible open interval."""


class SingularPath(MetashockError):
    """A path integral hit a point where its integrand is not real-valued."""


class NoSignChange(MetashockError):
    """A scan for a sign change of a monotone function came up empty."""


class NonSmoothProfile(MetashockError):
    """Linearization was requested around a profile with a slope kink."""


class ConvergenceFailure(MetashockError):
    """An eigenvalue computation did not converge."""


class UnsupportedConfiguration(MetashockError):
    """A closed-form formula was requested outside its regime of validity."""


class DomainError(MetashockError):
    """Closed-form eigenfunction parameters leave their real domain."""


class ThresholdNeverReached(MetashockError):
    """An interface track never entered the requested stopping band."""


class QuadratureError(MetashockError):
    """Adaptive integration failed to meet its error target."""
