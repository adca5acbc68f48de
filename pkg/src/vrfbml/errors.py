"""Exception hierarchy shared by the library and the CLI.

Each family maps onto one CLI exit code (see ``vrfbml.cli``).
"""

from __future__ import annotations


class VrfbmlError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(VrfbmlError):
    """Invalid or inconsistent configuration."""


class ParameterError(ConfigError):
    """A physical parameter violates its invariant."""


class SimulationError(VrfbmlError):
    """The thermal simulation could not be carried out."""


class CalibrationError(SimulationError):
    """Bisection on stack resistance has no bracket for the requested target."""

    def __init__(self, message: str, achieved_mean: float):
        super().__init__(message)
        self.achieved_mean = achieved_mean


class DataError(VrfbmlError):
    """Malformed, empty or otherwise unusable dataset."""


class CsvParseError(DataError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class TrainingError(VrfbmlError):
    """Model fitting failed or was asked for with invalid hyperparameters."""


class ModelFormatError(VrfbmlError):
    """A model file is corrupt, of the wrong kind, or of an unknown version."""


class ProvenanceError(DataError):
    """Dataset content differs from the one a model was trained against."""
