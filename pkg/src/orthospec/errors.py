"""Exception hierarchy shared by all modules."""


class OrthospecError(Exception):
    """Base class for every error raised by the package."""


class PreconditionError(OrthospecError, ValueError):
    """An argument violates a documented precondition."""


class InvalidBodyError(OrthospecError, ValueError):
    """A body is not strictly convex or its parameters are malformed."""


class AccuracyError(OrthospecError, ArithmeticError):
    """A quadrature or grid is too coarse for the requested accuracy."""


class SolverError(OrthospecError, ArithmeticError):
    """The common-perpendicular solver failed to converge.

    ``xi`` holds the offending lattice vectors.
    """

    def __init__(self, message, xi=()):
        super().__init__(message)
        self.xi = [tuple(int(v) for v in x) for x in xi]


class PoleError(OrthospecError, ZeroDivisionError):
    """Evaluation requested at (or numerically on top of) a pole."""


class DomainError(OrthospecError, ValueError):
    """Evaluation requested outside the domain where the method is valid."""


class RangeError(OrthospecError, ValueError):
    """A query exceeds the range covered by precomputed data."""


class SingularityError(OrthospecError, ValueError):
    """A transform was requested at one of its singular points."""


class ScaleError(OrthospecError, ValueError):
    """An oscillatory integral exceeds the supported frequency scale."""


class ConfigError(OrthospecError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
