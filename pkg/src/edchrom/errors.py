"""Exception types shared across the solver."""


class DomainError(ValueError):
    """An input lies outside the region where the model algebra is defined."""


class SolverError(RuntimeError):
    """An iterative solve failed to converge or hit a singular pivot."""

    def __init__(self, message, *, bracket=None, block=None, history=None, time=None):
        super().__init__(message)
        self.bracket = bracket
        self.block = block
        self.history = history
        self.time = time
