"""Exception types raised across the package.

Every error derives from :class:`GcnPlusError` so the CLI can turn any of them
into a machine-readable failure record.
"""


class GcnPlusError(Exception):
    """Base class for all library errors."""


# graph construction
class GraphError(GcnPlusError, ValueError):
    pass


class SelfLoopInput(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class IndexOutOfRange(GraphError):
    pass


class EmptyNodeSet(GraphError):
    pass


class DimensionMismatch(GcnPlusError, ValueError):
    pass


class NoConvergence(GcnPlusError, RuntimeError):
    """Iterative estimate did not settle; ``estimate`` holds the last value."""

    def __init__(self, message, estimate=None, iterations=None):
        super().__init__(message)
        self.estimate = estimate
        self.iterations = iterations


# propagation
class BetaOutOfRange(GcnPlusError, ValueError):
    pass


class InvalidConfig(GcnPlusError, ValueError):
    pass


class DenseLimitExceeded(GcnPlusError, ValueError):
    pass


class SingularMatrix(GcnPlusError, ArithmeticError):
    pass


# metrics
class DegenerateGraph(GcnPlusError, ValueError):
    """Fraction metrics are undefined; ``report`` still carries raw energies."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# training
class EmptyMask(GcnPlusError, ValueError):
    pass


class NonFiniteLoss(GcnPlusError, FloatingPointError):
    pass


# data io
class DataError(GcnPlusError):
    pass


class MissingFile(DataError, FileNotFoundError):
    pass


class ParseError(DataError, ValueError):
    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class InconsistentDims(DataError, ValueError):
    pass


class OverlappingMasks(InconsistentDims):
    pass


class LabelOutOfRange(DataError, ValueError):
    pass


class InfeasibleSpec(DataError, ValueError):
    pass


class IoError(DataError, OSError):
    pass


class SchemaMismatch(DataError, ValueError):
    pass
