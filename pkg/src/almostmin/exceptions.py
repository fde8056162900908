"""Exception hierarchy.

Every error raised by the library derives from :class:`AlmostMinError` so the
CLI can map library failures to exit codes in one place.
"""


class AlmostMinError(Exception):
    """Base class for all library errors."""


class SpecError(AlmostMinError, ValueError):
    """A set or family specification is malformed or out of range."""


class ConfigError(AlmostMinError, ValueError):
    """A run configuration file is invalid."""


class NumericalError(AlmostMinError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class AccuracyError(NumericalError):
    """The distance oracle is too coarse for the requested resolution."""


class EmptyComplementError(NumericalError):
    """No Whitney cube could be accepted inside the box."""


class OutOfBox(AlmostMinError, ValueError):
    """A query point lies outside the root box of a decomposition."""


class UnresolvedRegion(NumericalError):
    """A query point lies in the unresolved collar around the closed set."""


class OrderError(AlmostMinError, ValueError):
    """A derivative of too high an order was requested."""


class InsufficientSamples(NumericalError):
    """Too few admissible sample points survived filtering."""


class QuadratureBudgetExceeded(NumericalError):
    """Adaptive quadrature hit its subdivision limit before converging."""


class DomainMismatch(AlmostMinError, ValueError):
    """An integration domain does not fit the sheet's domain."""


class CloseEnoughViolation(AlmostMinError, ValueError):
    """The tilt/offset hypothesis of the reparametrization fails."""


class NewtonDivergence(NumericalError):
    """Chart inversion by Newton's method failed to converge."""


class DomainExceeded(NumericalError):
    """A Newton iterate left the domain of the sheet being inverted."""


class DegenerateEta(NumericalError):
    """The regularized distance vanishes identically on the box."""


class KappaSearchFailure(NumericalError):
    """No admissible scaling constant for the branched patches was found."""


class TrackingLoss(NumericalError):
    """Branch tracking during analytic continuation became ambiguous."""
