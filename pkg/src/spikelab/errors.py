"""Exception hierarchy shared by the solvers and the CLI."""


class SpikeLabError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class ConfigError(SpikeLabError, ValueError):
    exit_code = 2


class DomainError(SpikeLabError, ValueError):
    """An evaluator was called outside its well-posed interval."""

    exit_code = 2


class SolverError(SpikeLabError, RuntimeError):
    exit_code = 3


class NewtonDiverged(SolverError):
    pass


class NoSolution(SolverError):
    pass


class StepFailure(SolverError):
    pass


class TailNotLinear(SolverError):
    pass


class SingularSlaveOperator(SolverError):
    pass


class EigSolverFailure(SolverError):
    pass


class QuadratureFailure(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class StepSizeUnderflow(SolverError):
    pass


class ResolutionExceeded(SolverError):
    pass


class MaxPointsExceeded(SolverError):
    pass


class NoQuasiEquilibrium(SolverError):
    """Matching system has no root; ``constraint`` names the failed bound."""

    def __init__(self, message, constraint):
        super().__init__(message)
        self.constraint = constraint


class RegimeMismatch(SpikeLabError):
    exit_code = 4


class PrefactorOutOfRange(RegimeMismatch):
    pass
