"""Exception hierarchy shared by every module of the simulator."""

from typing import Any


class SimulationError(Exception):
    """Raised when a simulation step cannot be carried out."""

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class StructuralError(SimulationError):
    """Dimension, index or arity mismatch."""


class NumericError(SimulationError):
    """A quantity became non-finite or overflowed."""


class SamplerError(SimulationError):
    """A Markov chain could not be initialised."""


class DegenerateOverlapError(NumericError):
    """The variational state and the target are numerically orthogonal."""


class LearnerFailure(SimulationError):
    """An optimisation loop gave up; carries the trace recorded so far."""

    def __init__(self, message: str, trace: tuple[Any, ...] = ()):
        super().__init__(message)
        self.trace = trace


class ExecutionAborted(SimulationError):
    """Circuit execution stopped early.

    `state` is the last state that was produced successfully and `trace` the
    execution trace up to (not including) the failing gate.
    """

    def __init__(self, message: str, *, state: Any, trace: Any):
        super().__init__(message)
        self.state = state
        self.trace = trace


class ConfigError(SimulationError):
    """An experiment, circuit or parameter file is malformed."""

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field:
            location.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)
        self.field = field
        self.line = line
