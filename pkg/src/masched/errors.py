"""Exception hierarchy shared across the toolchain.

The CLI maps these onto exit codes: usage errors are 1, model errors 2,
runtime errors 3, and observation-consistency aborts 4.
"""


class MaschedError(Exception):
    """Base class for all tool errors."""


class ModelError(MaschedError):
    """Invalid model: syntax, declarations, bounds, or configuration."""


class ParseError(ModelError):
    """Syntax or semantic error in a model description, with position info."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class SimulationError(MaschedError):
    """Runtime failure during a simulation run (deadlock, bound violation,
    step-cap overflow)."""


class ConsistencyError(MaschedError):
    """Observation maps two states with different action signatures to the
    same observable: the partial-observability contract is violated."""


class EmptyStrategyError(MaschedError):
    """A strategy table with no rows was given where decisions are needed."""


class ResourceError(MaschedError):
    """A configured memory budget was exceeded."""
