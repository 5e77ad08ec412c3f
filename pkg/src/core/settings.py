from enum import StrEnum
from pathlib import Path

from dotenv import find_dotenv
from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class LogLevel(StrEnum):
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"

    def to_logging_level(self) -> int:
        """Convert to Python logging level constant."""
        import logging

        mapping = {
            LogLevel.DEBUG: logging.DEBUG,
            LogLevel.INFO: logging.INFO,
            LogLevel.WARNING: logging.WARNING,
            LogLevel.ERROR: logging.ERROR,
            LogLevel.CRITICAL: logging.CRITICAL,
        }
        return mapping[self]


class Settings(BaseSettings):
    """Process-level settings read from the environment (prefix ``URBANSAM_``)."""

    model_config = SettingsConfigDict(
        env_prefix="URBANSAM_",
        env_file=find_dotenv(),
        env_file_encoding="utf-8",
        env_ignore_empty=True,
        extra="ignore",
    )

    # Overrides TrainConfig.seed when set
    SEED: int | None = None
    LOG_LEVEL: LogLevel = LogLevel.WARNING
    NUM_WORKERS: int = Field(default=0, ge=0)
    DEVICE: str = "cpu"
    OUTPUT_DIR: Path = Path("runs")

    @field_validator("DEVICE")
    @classmethod
    def _validate_device(cls, v: str) -> str:
        if v != "cpu" and not v.startswith("cuda"):
            raise ValueError(f"Unsupported device: {v}")
        return v

    def resolve_seed(self, configured: int) -> int:
        return configured if self.SEED is None else self.SEED


settings = Settings()
