"""
Environment settings (SPLITLAB_* variables and .env).
"""
from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SPLITLAB_", env_file=".env", extra="ignore")

    log_level: str = "INFO"
    workers: int = Field(default=1, ge=1)
    substep_tol: float = Field(default=1e-12, gt=0)
    results_dir: Path = Path("results")


@lru_cache
def get_settings() -> Settings:
    return Settings()
