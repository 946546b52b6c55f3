"""Exception hierarchy shared by every track.

Each error carries an ``exit_code`` so the CLI can map module failures onto
its documented exit statuses without a lookup table.
"""

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_NOT_CONVERGED = 4
EXIT_HYPOTHESIS = 5


class PhiError(Exception):
    exit_code = EXIT_PRECONDITION


class ParseError(PhiError):
    exit_code = EXIT_PARSE

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


# -- precondition failures ---------------------------------------------------

class PreconditionError(PhiError):
    exit_code = EXIT_PRECONDITION


class DimensionMismatch(PreconditionError):
    pass


class IndexOutOfRange(PreconditionError):
    pass


class InvalidPolicy(PreconditionError):
    pass


class InvalidSchedule(PreconditionError):
    pass


class ZeroDistanceProbe(PreconditionError):
    pass


class NonStochasticKernel(PreconditionError):
    pass


class InvalidDistribution(PreconditionError):
    pass


class NotNormal(PreconditionError):
    pass


class PersistentUnimodularSpectrum(PreconditionError):
    pass


class ContourNearSpectrum(PreconditionError):
    pass


class SingularResolvent(PreconditionError):
    pass


class NonCommutingFamily(PreconditionError):
    pass


class NotIdempotent(PreconditionError):
    pass


class InvalidSubspace(PreconditionError):
    pass


class InvalidConfig(PreconditionError):
    pass


class NonPositiveStimulus(InvalidConfig):
    pass


class InsufficientTail(PreconditionError):
    pass


# -- convergence failures ----------------------------------------------------

class ConvergenceError(PhiError):
    exit_code = EXIT_NOT_CONVERGED


class NotConverged(ConvergenceError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NonFiniteValue(ConvergenceError):
    pass


class DivergedIteration(ConvergenceError):
    pass


# -- hypothesis violations ---------------------------------------------------

class HypothesisViolated(PhiError):
    exit_code = EXIT_HYPOTHESIS


class UniquenessCheckFailed(HypothesisViolated):
    pass


class MonotonicityViolation(HypothesisViolated):
    pass


class LimitMismatch(HypothesisViolated):
    pass


class FixedSpaceMismatch(HypothesisViolated):
    pass


class FixedPointCheckFailed(HypothesisViolated):
    pass


class BoundHypothesisViolated(HypothesisViolated):
    pass


class KappaDeclarationViolated(HypothesisViolated):
    pass


class CouplingViolated(HypothesisViolated):
    pass
