"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid physical or numerical parameters."""


class PoleError(ArithmeticError):
    """A control field was evaluated at (or numerically on) its pole."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class IntegrationError(RuntimeError):
    """The integrator could not advance; ``t`` is the time it got stuck at."""

    def __init__(self, message, t):
        super().__init__(f"{message} at t={t!r}")
        self.t = t
