from core.errors import (
    ConfigurationError,
    CoverageError,
    DataError,
    InvalidInputError,
    NumericalError,
    PromptSimulationError,
    UrbanSAMError,
)
from core.settings import settings

__all__ = [
    "settings",
    "UrbanSAMError",
    "ConfigurationError",
    "DataError",
    "InvalidInputError",
    "CoverageError",
    "PromptSimulationError",
    "NumericalError",
]
