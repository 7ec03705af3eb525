# app/core/settings.py
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="MATCHVAR_", env_file=".env", extra="ignore")

    api_token: str = "changeme"
    results_dir: str = "./app/results"
    log_level: str = "INFO"
    workers: int = Field(1, ge=1, description="Process pool size for replications and forest fits")


@lru_cache
def get_settings() -> Settings:
    return Settings()
