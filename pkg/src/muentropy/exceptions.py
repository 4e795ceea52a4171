"""Exception hierarchy."""


class MuEntropyError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(MuEntropyError, ValueError):
    pass


class EmptyOrUnbounded(GeometryError):
    """The halfspaces do not cut out a compact body with nonempty interior."""


class Degenerate(EmptyOrUnbounded):
    """The halfspaces cut out a nonempty but flat (lower-dimensional) set."""


class IrrationalNormal(GeometryError):
    pass


class BoundaryPoint(GeometryError):
    pass


class NonFinite(MuEntropyError, ArithmeticError):
    pass


class SlopeCondition(MuEntropyError, ValueError):
    """No supporting plane through (v, h) touches q along both edges at v."""


class NoConvergence(MuEntropyError, RuntimeError):
    """Raised by solvers that fail to meet tolerances.

    ``best`` carries the best iterate found, when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class OutOfRange(MuEntropyError, ValueError):
    pass


class NegativeHeatCapacity(MuEntropyError, ValueError):
    pass
