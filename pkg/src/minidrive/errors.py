"""Exception types shared across the package."""


class MinidriveError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MinidriveError):
    """Non-finite or structurally invalid input."""


class DomainError(MinidriveError):
    """Query outside the valid domain (time, horizon, ...)."""


class LowSpeedDegenerateError(MinidriveError):
    """Flatness inversion hit the low-speed singularity.

    Carries the position/speed part that is still well-defined.
    """

    def __init__(self, px, py, v):
        super().__init__(
            f"speed {v:.3e} m/s below the flatness singularity threshold"
        )
        self.px = px
        self.py = py
        self.v = v


class SolverError(MinidriveError):
    """Singular or otherwise unsolvable system in the planner."""


class ScenarioParseError(MinidriveError):
    """Malformed scenario file; names the file, line, and field."""

    def __init__(self, path, line, field, message):
        super().__init__(f"{path}:{line}: field '{field}': {message}")
        self.path = path
        self.line = line
        self.field = field


class PolicyError(MinidriveError):
    """External-policy protocol violation, timeout, or malformed decision."""


class HorizonError(MinidriveError):
    """Not enough future frames to satisfy the requested horizon."""
