"""Exception hierarchy.

ConfigError maps to CLI exit code 2; every NumericalError maps to exit code 3.
"""


class FermatError(Exception):
    """Base class for all errors raised by the package."""


class ConfigError(FermatError):
    pass


class NumericalError(FermatError):
    pass


class OutOfDomain(NumericalError):
    pass


class NonfiniteDensity(NumericalError):
    pass


class DisconnectedGraph(NumericalError):
    pass


class SizeCapExceeded(NumericalError):
    pass


class DoubleNormalization(NumericalError):
    pass


class LeftDomain(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class EmptyGraph(NumericalError):
    pass


class NegativeArgument(NumericalError):
    pass


class ZeroDegree(NumericalError):
    pass


class EmptySide(NumericalError):
    pass


class EpsOutOfRange(NumericalError):
    pass


class NotConverged(NumericalError):
    def __init__(self, tolerance, iterations, msg=""):
        self.tolerance = tolerance
        self.iterations = iterations
        super().__init__(msg or f"no convergence to {tolerance:g} within {iterations} iterations")


class HypothesisViolated(NumericalError):
    def __init__(self, msg, witness=None):
        self.witness = witness
        super().__init__(msg)


class UnstableStep(NumericalError):
    pass


class EmptyCluster(NumericalError):
    pass


class TooManyClusters(NumericalError):
    pass


class EmptyProcess(NumericalError):
    pass


class StageError(NumericalError):
    """Wraps an error raised inside a pipeline stage, keeping the stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
