"""Exception hierarchy shared by all gencov modules."""


class GencovError(Exception):
    """Base class for errors raised by gencov."""


class InvalidSpec(GencovError, ValueError):
    """A graph family or configuration specification is invalid."""


class NotChordal(GencovError, ValueError):
    pass


class DimensionMismatch(GencovError, ValueError):
    pass


class TooLargeToEnumerate(GencovError, ValueError):
    """The state space exceeds the configured enumeration cap."""


class NotPositiveDefinite(GencovError, ValueError):
    pass


class SingularMatrix(GencovError, ValueError):
    pass


class SingularSubmatrix(SingularMatrix):
    pass


class InvalidRho(GencovError, ValueError):
    pass


class NotConverged(GencovError, RuntimeError):
    pass


class UnboundedObjective(GencovError, RuntimeError):
    pass


class FeatureExplosion(GencovError, ValueError):
    pass


class EmptyCandidateSetWarning(UserWarning):
    """Raised as a warning when the correlation prescreen keeps no vertex."""
