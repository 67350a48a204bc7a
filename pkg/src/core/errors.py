"""
Error types raised by the lab. Each carries the CLI exit code it maps to.
"""

from typing import Optional


class LabError(Exception):
    """Base class for all lab errors."""

    exit_code = 3


class InvalidParameterError(LabError, ValueError):
    """A parameter is outside its documented range."""

    exit_code = 2


class ConfigError(LabError, ValueError):
    """An experiment config failed validation."""

    exit_code = 2

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class OutOfDomainError(LabError, ValueError):
    """A circle, disk or region leaves the lattice."""


class ResolutionError(LabError):
    """The lattice or path resolution is too coarse for the request."""

    def __init__(self, message: str, max_feasible: Optional[int] = None):
        self.max_feasible = max_feasible
        super().__init__(message)


class DegenerateInputError(LabError, ValueError):
    """Input is degenerate (equal endpoints, too few vertices)."""


class NumericalInstabilityError(LabError):
    """A numerical step blew up."""

    def __init__(self, message: str, step: Optional[int] = None):
        self.step = step
        super().__init__(message)


class DivergentWalkerError(LabError):
    """A walk-on-spheres walker exceeded its step budget."""

    def __init__(self, cube_id: int, steps: int):
        self.cube_id = cube_id
        self.steps = steps
        super().__init__(f"walker from cube {cube_id} did not hit the path in {steps} steps")


class FileFormatError(LabError):
    """A lab file could not be parsed."""

    exit_code = 2

    def __init__(self, path: str, offset: int, message: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path} at byte {offset}: {message}")
