"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain where an operation is defined."""


class SimulationError(RuntimeError):
    """A simulated path produced a non-finite state."""

    def __init__(self, message, *, path=None, step=None, seed=None):
        super().__init__(message)
        self.path = path
        self.step = step
        self.seed = seed


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach its tolerance."""


class ConfigError(ValueError):
    """An experiment configuration could not be parsed or is inconsistent."""

    def __init__(self, message, key=None):
        super().__init__(message if key is None else f"{key}: {message}")
        self.key = key
