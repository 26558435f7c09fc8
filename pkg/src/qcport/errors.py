"""Exception hierarchy shared across the package."""


class QCPortError(Exception):
    """Base class for all package errors."""


class ParseError(QCPortError):
    pass


class ValidationError(QCPortError):
    pass


class DimensionMismatch(QCPortError):
    pass


class UnsupportedMeasure(QCPortError):
    pass


class NotConvexMeasure(QCPortError):
    pass


class RootBracketFailure(QCPortError):
    pass


class PropertyViolation(QCPortError):
    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class InfeasibleProblem(QCPortError):
    def __init__(self, message, evidence=None):
        super().__init__(message)
        self.evidence = evidence or {}


class UnboundedRisk(QCPortError):
    pass


class SolverFailure(QCPortError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ResolutionTooCoarse(QCPortError):
    pass


class LineSearchStall(QCPortError):
    pass
