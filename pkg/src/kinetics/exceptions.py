"""
Errors raised by the kinetics numerics.

Validation problems derive from ValueError, numerical breakdowns from
ArithmeticError, so callers that only care about the broad category can
catch the builtin.
"""


class KineticsError(Exception):
    """Base class for every error raised by the kinetics package."""


class ModelValidationError(KineticsError, ValueError):
    """A model, law or parameter set violates its preconditions."""


class SurrogateMismatch(ModelValidationError):
    """The mean-field surrogate clock does not match the state clock."""

    def __init__(self, surrogate_time, state_time, dt):
        self.surrogate_time = surrogate_time
        self.state_time = state_time
        self.dt = dt
        super().__init__(
            f"Surrogate time {surrogate_time:.6g} differs from state time "
            f"{state_time:.6g} by more than dt/2 = {dt / 2:.3g}."
        )


class NumericalFailure(KineticsError, ArithmeticError):
    """The computation produced non-finite values (usually dt too large)."""

    def __init__(self, message, step=None, replica=None):
        self.detail = message
        self.step = step
        self.replica = replica
        where = []
        if replica is not None:
            where.append(f"replica {replica}")
        if step is not None:
            where.append(f"step {step}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ConvergenceError(NumericalFailure):
    """An iteration stopped before reaching its tolerance."""

    def __init__(self, message, iterations, residual):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message}: {iterations} iterations, residual {residual:.3e}")
