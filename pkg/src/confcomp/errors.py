"""Exception hierarchy shared by all confcomp modules."""


class ConfcompError(Exception):
    """Base class for every error raised by this package."""


class DomainError(ConfcompError):
    """A point lies outside a chart's coordinate domain or on an excluded set."""


class PositivityError(ConfcompError):
    """A field that must be positive evaluated to a nonpositive value."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class DegeneracyError(ConfcompError):
    """A matrix that must be positive definite is not.

    Carries the witness point and the offending smallest eigenvalue when
    they are known.
    """

    def __init__(self, message, point=None, min_eigenvalue=None):
        super().__init__(message)
        self.point = point
        self.min_eigenvalue = min_eigenvalue


class ConditioningError(ConfcompError):
    """A linear-algebra step hit a near-singular matrix."""


class ConfigurationError(ConfcompError):
    """Inconsistent or invalid arguments (dimensions, counts, schedules)."""


class RegularityError(ConfcompError):
    """A curve has vanishing velocity where a regular curve is required."""


class InsufficientDataError(ConfcompError):
    """Not enough rays or samples to run an analysis."""


class DataError(ConfcompError):
    """Input data violates a structural assumption (e.g. non-monotone truncations)."""


class ExpressionError(ConfcompError):
    """A coordinate expression failed to parse or evaluate."""

    def __init__(self, message, source=None, position=None):
        super().__init__(message)
        self.source = source
        self.position = position


class ManifestError(ConfcompError):
    """A manifold-definition file is malformed."""
