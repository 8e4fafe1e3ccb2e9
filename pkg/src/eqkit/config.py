from __future__ import annotations

from pathlib import Path
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

LOG_LEVELS: dict[str, str] = {"error": "ERROR", "info": "INFO", "debug": "DEBUG"}


class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_file=".env", extra="ignore")

    log_level: Literal["error", "info", "debug"] = Field(
        default="info", validation_alias="EQKIT_LOG"
    )
    data_dir: Path = Field(default=Path("./data"), validation_alias="EQKIT_DATA_DIR")
    record_runs: bool = Field(default=False, validation_alias="EQKIT_RECORD_RUNS")

    static_tol: float = Field(default=1e-9, gt=0, validation_alias="EQKIT_STATIC_TOL")
    static_max_iter: int = Field(default=200, gt=0, validation_alias="EQKIT_STATIC_MAX_ITER")
    # Relative to max(1, C).
    balance_tol: float = Field(default=1e-9, gt=0, validation_alias="EQKIT_BALANCE_TOL")

    dynamic_tol: float = Field(default=1e-4, gt=0, validation_alias="EQKIT_DYNAMIC_TOL")
    dynamic_max_iter: int = Field(default=50000, gt=0, validation_alias="EQKIT_DYNAMIC_MAX_ITER")
    dynamic_step_scale: float = Field(
        default=1.0, gt=0, validation_alias="EQKIT_DYNAMIC_STEP_SCALE"
    )
    dynamic_averaging_fraction: float = Field(
        default=0.1, gt=0, le=1, validation_alias="EQKIT_DYNAMIC_AVERAGING_FRACTION"
    )
    dynamic_newton_polish: bool = Field(
        default=True, validation_alias="EQKIT_DYNAMIC_NEWTON_POLISH"
    )
    dynamic_polish_after: int = Field(
        default=25, ge=0, validation_alias="EQKIT_DYNAMIC_POLISH_AFTER"
    )

    csv_digits: int = Field(default=12, ge=1, le=17, validation_alias="EQKIT_CSV_DIGITS")
    contour_digits: int = Field(default=9, ge=1, le=17, validation_alias="EQKIT_CONTOUR_DIGITS")

    @field_validator("log_level", mode="before")
    @classmethod
    def _lower_level(cls, value: object) -> object:
        return value.strip().lower() if isinstance(value, str) else value

    @property
    def logging_level(self) -> str:
        return LOG_LEVELS[self.log_level]

    @property
    def database_path(self) -> Path:
        return self.data_dir / "runs.db"
