"""Application configuration settings."""
import os

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Defaults loaded from CURVESEG_* environment variables (or .env)."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="CURVESEG_",
        case_sensitive=False,
        extra="ignore"
    )

    # Application
    log_level: str = "INFO"
    output_dir: str = "results"

    # Parallelism (CURVESEG_THREADS)
    threads: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)

    # Clustering
    max_iter: int = Field(default=100, ge=1)
    seed: int = 0

    # Self-organizing map
    som_epochs: int = Field(default=30, ge=1)

    # Numeric text emitted to CSV files
    float_format: str = ".17g"


# Global settings instance
settings = Settings()
