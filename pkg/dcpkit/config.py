"""Process settings read from ``DCPKIT_*`` environment variables or ``.env``.

Experiment parameters live in :class:`dcpkit.models.schemas.ExperimentConfig`;
these settings only cover how the process runs.
"""

from functools import lru_cache
from typing import Sequence

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from dcpkit.models.enums import Preset

MAX_SEED = 2**64

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
ENVIRONMENTS = ("development", "production", "test")


def _choice(field: str, value: str, allowed: Sequence[str]) -> str:
    if value not in allowed:
        raise ValueError(f"{field} must be one of {list(allowed)}, got {value!r}")
    return value


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="DCPKIT_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    ENVIRONMENT: str = Field(default="production", description=" / ".join(ENVIRONMENTS))
    LOG_LEVEL: str = Field(default="WARNING", description="Level of the dcpkit stderr logger")
    THREADS: int = Field(
        default=1, ge=1, description="Worker threads for per-image and per-pair stages"
    )
    SEED: int = Field(default=0, ge=0, lt=MAX_SEED, description="Seed for every random step")
    OUTPUT_DIR: str = Field(default="dcpkit-out", description="Default artifact directory")
    DEFAULT_PRESET: str = Field(default=Preset.FERET128.value, description="Fallback preset")

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        return _choice("LOG_LEVEL", v.upper(), LOG_LEVELS)

    @field_validator("ENVIRONMENT")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        return _choice("ENVIRONMENT", v.lower(), ENVIRONMENTS)

    @field_validator("DEFAULT_PRESET")
    @classmethod
    def validate_preset(cls, v: str) -> str:
        return _choice("DEFAULT_PRESET", v.lower(), [p.value for p in Preset])

    @property
    def is_development(self) -> bool:
        return self.ENVIRONMENT == "development"


@lru_cache()
def get_settings() -> Settings:
    """Settings are read once per process; tests clear the cache between cases."""
    return Settings()


settings = get_settings()
