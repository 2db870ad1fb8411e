"""Exception hierarchy shared by every solver module."""


class SolverError(Exception):
    """Base class for all errors raised by this package."""


class CompatibilityError(SolverError, ValueError):
    """Operands disagree on backend, length, shape or format."""


class RepresentationError(CompatibilityError):
    """An operation needs raw serial data but got another backend."""


class MatrixCompatibilityError(CompatibilityError):
    pass


class SingularMatrixError(SolverError, ArithmeticError):
    """A zero pivot was met during factorization.

    The ``column`` attribute holds the 0-based column of the failing pivot.
    """

    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"zero pivot in column {column}")


class AlreadyAttachedError(SolverError):
    """A linear solver instance was associated with a second session."""


class LifecycleError(SolverError):
    """A session function was called in the wrong lifecycle state."""


class WrongSolverError(SolverError):
    """A solver-specific function was applied to a session using another solver."""


class IllegalInputError(SolverError, ValueError):
    pass


class RecoverableFailure(SolverError):
    """Raised by user callbacks to request a retry with a smaller step."""


class KrylovConvergenceError(SolverError):
    """SPGMR did not reach the tolerance within the allowed restarts."""

    def __init__(self, res_norm, iterations, reduced=False):
        self.res_norm = res_norm
        self.iterations = iterations
        # True when the residual still dropped below its initial value
        self.reduced = reduced
        super().__init__(
            f"no convergence after {iterations} iterations (residual {res_norm:.3e})"
        )


class IntegrationError(SolverError):
    """Integrator failure; ``t`` holds the time reached."""

    def __init__(self, message, t=None):
        self.t = t
        super().__init__(message)


class TooMuchWorkError(IntegrationError):
    pass


class TooMuchAccuracyError(IntegrationError):
    pass


class ErrorTestFailure(IntegrationError):
    pass


class ConvergenceFailure(IntegrationError):
    pass


class CallbackError(IntegrationError):
    """A user callback failed unrecoverably or produced non-finite values."""


class TooCloseError(IntegrationError):
    pass


class InitializationFailure(IntegrationError):
    """Consistent initial conditions could not be computed."""
