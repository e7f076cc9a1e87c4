# errors.py
from typing import Optional


class RadarBAError(Exception):
    """Root of every error raised by this package."""
    exit_code: int = 1


class ConfigError(RadarBAError, ValueError):
    exit_code = 1


class DomainError(RadarBAError, ValueError):
    """A numeric precondition was violated (non-positive range or time step, shape mismatch, empty window)."""
    exit_code = 2


class DegenerateGeometryError(DomainError):
    pass


class SceneFormatError(RadarBAError, ValueError):
    exit_code = 2

    def __init__(self, message: str, line: int) -> None:
        super().__init__(f"line {line}: {message}")
        self.line: int = line


class MeasurementError(RadarBAError, IOError):
    exit_code = 2


class NumericalError(RadarBAError, ArithmeticError):
    exit_code = 3

    def __init__(self, message: str, parameter: Optional[str] = None) -> None:
        if parameter is not None:
            message = f"{message} (parameter: {parameter})"
        super().__init__(message)
        self.parameter: Optional[str] = parameter
