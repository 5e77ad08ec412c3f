"""Exception hierarchy shared by every urbansam package.

Each family maps onto one CLI exit code (see ``cli.main``).
"""

from __future__ import annotations

__all__ = [
    "UrbanSAMError",
    "ConfigurationError",
    "InvalidInputError",
    "DataError",
    "CoverageError",
    "PromptSimulationError",
    "NumericalError",
]


class UrbanSAMError(Exception):
    """Base class for all urbansam failures."""

    exit_code: int = 1


class ConfigurationError(UrbanSAMError, ValueError):
    """Sizes, divisibility or names that cannot describe a valid model or pipeline."""

    exit_code = 2


class DataError(UrbanSAMError):
    """Unreadable rasters, broken manifests and other data problems."""

    exit_code = 3


class InvalidInputError(DataError, ValueError):
    """A tensor or array argument violates a value-range, binarity or shape contract."""


class CoverageError(DataError):
    """Stitching windows leave raster cells uncovered."""

    def __init__(self, message: str, uncovered: list[tuple[int, int]]) -> None:
        super().__init__(message)
        self.uncovered = uncovered


class PromptSimulationError(DataError):
    """A simulated prompt could not reach its target overlap."""

    def __init__(self, message: str, best_overlap: float) -> None:
        super().__init__(message)
        self.best_overlap = best_overlap


class NumericalError(UrbanSAMError, ArithmeticError):
    """Non-finite activations or losses."""

    exit_code = 4
