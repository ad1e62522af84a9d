"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: infeasibility -> 2, solver failure -> 3,
bad input / contract violation -> 4.
"""


class R0GPError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class ContractError(R0GPError, ValueError):
    """An input violates a documented precondition."""

    exit_code = 4


class EigensolverError(R0GPError, RuntimeError):
    """The dense eigensolver failed to converge."""

    exit_code = 3


class SolverError(R0GPError, RuntimeError):
    """The geometric-program solver failed (max iterations, numerical breakdown)."""

    exit_code = 3


class InfeasibleError(R0GPError):
    """A program or allocation problem has no strictly feasible point."""

    exit_code = 2


class StepSizeError(R0GPError, RuntimeError):
    """The ODE integrator produced a negative state; a smaller step is needed."""

    exit_code = 3
