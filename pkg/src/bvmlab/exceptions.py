"""Exception hierarchy shared by every module of the package."""


class BvmLabError(Exception):
    """Base class for all errors raised by bvmlab."""


# matrix kernels
class NotPositiveSemidefinite(BvmLabError, ValueError):
    pass


class SingularUpdate(BvmLabError, ValueError):
    pass


# exponential families
class OutOfDomain(BvmLabError, ValueError):
    pass


class InvalidSimplex(BvmLabError, ValueError):
    pass


class InvalidSpec(BvmLabError, ValueError):
    pass


# local analysis and diagnostics
class DimensionMismatch(BvmLabError, ValueError):
    pass


class DimensionTooLarge(BvmLabError, ValueError):
    pass


class DegenerateWeights(BvmLabError, RuntimeError):
    """Importance weights collapsed onto too few draws."""


class UnsupportedMethod(BvmLabError, ValueError):
    pass


class PreconditionViolated(BvmLabError, ValueError):
    def __init__(self, failed):
        self.failed = list(failed)
        super().__init__("precondition(s) violated: " + "; ".join(self.failed))


# empirical likelihood
class Infeasible(BvmLabError, ValueError):
    pass


class BoundaryDegenerate(BvmLabError, ValueError):
    pass


# curved families
class DegenerateJacobian(BvmLabError, ValueError):
    pass


class NoConvergedStart(BvmLabError, RuntimeError):
    pass


class InvalidPattern(BvmLabError, ValueError):
    pass


class RankDeficient(BvmLabError, ValueError):
    pass


# harness
class ConfigInvalid(BvmLabError, ValueError):
    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("invalid config: " + "; ".join(self.errors))


class UnknownField(BvmLabError, KeyError):
    pass


class IoFailure(BvmLabError, OSError):
    pass


class SolverStalled(BvmLabError, RuntimeError):
    """A feasible problem on which the iterative solver made no progress."""
