"""Exception hierarchy shared by the engines, the config parser and the CLI."""
from typing import Optional


class SimulationError(Exception):
    """Base class for every failure the command line maps to an exit code."""
    exit_code = 3


class ConfigError(SimulationError):
    """Invalid or inconsistent run configuration."""
    exit_code = 2

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        line: Optional[int] = None,
        key: Optional[str] = None,
    ):
        self.message = message
        self.path = path
        self.line = line
        self.key = key
        super().__init__(self._render())

    def _render(self) -> str:
        if self.path and self.line is not None:
            return f"{self.path}:{self.line}: {self.message}"
        if self.path:
            return f"{self.path}: {self.message}"
        return self.message


class ModelError(SimulationError, ValueError):
    """Physical parameters violate a model invariant."""
    exit_code = 2

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        super().__init__(message)


class NumericError(SimulationError):
    """A numerical procedure failed or produced an unusable result."""


class SingularityError(NumericError):
    pass


class StepSizeError(NumericError):
    """Step-halving check disagreed by more than the tolerance."""


class ConvergenceError(NumericError):
    pass


class GridMismatchError(NumericError):
    pass


class EmptySpectrumError(NumericError):
    pass
