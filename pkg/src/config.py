"""Centralized configuration.

``AppSettings`` is the only environment-driven configuration (log level for the
CLI). Numerical knobs live in ``MleOptions`` and are passed explicitly.
"""

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings


class AppSettings(BaseSettings):
    """Top-level CLI settings."""

    log_level: str = "WARNING"

    model_config = {"env_prefix": "TOMOGUARD_"}


class MleOptions(BaseModel):
    """Stopping rules and thresholds for the likelihood maximizers."""

    model_config = ConfigDict(frozen=True)

    tolerance: float = Field(default=1e-10, gt=0)
    max_iterations: int = Field(default=100_000, ge=1)
    rank_threshold: float = Field(default=1e-8, gt=0)
    tie_tolerance: float = Field(default=1e-9, ge=0)
    # Step-size schedule of the diluted R·rho·R update
    dilution_start: float = Field(default=1.0, gt=0)
    dilution_floor: float = Field(default=1e-12, gt=0)
