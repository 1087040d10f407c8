"""Runtime settings, read from `DPSKIT_*` environment variables."""

from __future__ import annotations

import logging
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from dpskit.util import ONE_WEEK_IN_SECONDS


class Settings(BaseSettings):
    """Solver, model and cache settings.

    Every field can be overridden with an environment variable of the same
    name prefixed by `DPSKIT_`, e.g. `DPSKIT_TOL=1e-6`.
    """

    model_config = SettingsConfigDict(
        env_prefix="DPSKIT_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    tol: float = Field(default=1e-7, gt=0)
    gap_tol: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=200, ge=1)
    lambda_cap: float = -1.0
    face_reduction: bool = True
    kernel_tol: float = Field(default=1e-9, gt=0)
    workers: int = Field(default=1, ge=1)
    cache_enabled: bool = False
    cache_url: str = "redis://localhost:6379"
    cache_ttl: int = Field(default=ONE_WEEK_IN_SECONDS, ge=1)
    cache_timeout: float = Field(default=2.0, gt=0)
    log_level: str = "INFO"

    @property
    def log_level_value(self) -> int:
        """Return the numeric logging level."""
        level: int = logging.getLevelName(self.log_level.upper())
        return level


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return the process-wide settings, built once."""
    return Settings()
