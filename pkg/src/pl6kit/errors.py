"""Exception hierarchy shared by all modules.

The CLI maps each family onto an exit code: input problems exit 2,
numerical failures 3, non-convergence 4.
"""


class Pl6Error(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class InputError(Pl6Error, ValueError):
    """Rejected input: bad parameters, malformed files, violated preconditions."""

    exit_code = 2


class NumericalError(Pl6Error, ArithmeticError):
    """A numerical routine failed (non-Hermitian matrix, eigensolver, integrator)."""

    exit_code = 3


class TrackingError(NumericalError):
    """Adiabatic level tracking lost continuity between two grid points."""


class SingularJacobianError(NumericalError):
    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(Pl6Error, RuntimeError):
    """An iterative method stopped without meeting its convergence test.

    ``state`` carries whatever partial result the method had reached.
    """

    exit_code = 4

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
