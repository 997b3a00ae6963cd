"""Exception and warning types raised across the package."""


class SingularDynamics(ArithmeticError):
    """A linear system needed for an equilibrium or spectrum is ill-conditioned."""


class PositivityBreach(ArithmeticError):
    """A simulated state lost positivity beyond the tolerated discretisation error."""


class InsufficientWindow(ValueError):
    """The stationary time window is too short for the requested estimate."""


class QuadratureFailure(ArithmeticError):
    """Numerical integration did not reach the requested accuracy."""


class NotUnimodal(ValueError):
    """The inelastic spectrum is not a single positive peak."""


class ParseError(ValueError):
    """Malformed configuration text."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ValidationError(ValueError):
    """A parameter or configuration invariant is violated."""


class StepSizeWarning(UserWarning):
    """The time step is large compared to the fastest rate of the generator."""


class BudgetExhausted(UserWarning):
    """An optimisation stopped on its evaluation budget before converging."""
