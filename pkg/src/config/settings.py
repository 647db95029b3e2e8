# src/config/settings.py
import os
import sys
from typing import Literal, Optional

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# --- Determine Project Root and .env Path ---
# settings.py lives in project_root/src/config/
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..'))
ENV_FILE_PATH = os.path.join(PROJECT_ROOT, '.env')
DATA_DIR = os.path.join(PROJECT_ROOT, "data")

MAX_SEED = 2**64 - 1


class Settings(BaseSettings):
    """
    Run-wide options for the robust UC toolkit.

    Values come from (highest priority first) init kwargs (config file + CLI
    flags), environment variables, the project-root `.env` file, and the
    defaults below.
    """

    model_config = SettingsConfigDict(
        env_file=ENV_FILE_PATH,
        env_file_encoding='utf-8',
        # Unrelated variables in the environment or .env are ignored
        extra='ignore',
        validate_default=True,
    )

    # --- Solver backend ---
    BACKEND: Literal["auto", "highs", "gurobi"] = "auto"
    MIP_GAP: float = Field(0.01, gt=0.0, lt=1.0)  # 1% relative gap
    TIME_LIMIT: Optional[float] = Field(None, gt=0.0)  # seconds, None = unlimited
    THREADS: int = Field(1, ge=1)

    # --- Dynamic uncertainty set ---
    GAMMA: float = Field(1.0, ge=0.0)
    RHO: float = Field(0.1, gt=0.0, le=1.0)
    N_V: Optional[int] = Field(None, ge=1)  # None = keep every component
    LAG: int = Field(1, ge=0)
    NORM: Literal["l1", "l2", "linf", "l1_linf"] = "l1_linf"
    PERIOD_CYCLE: int = Field(24, ge=1)
    BUDGET_MODE: Literal["per_period", "remaining"] = "per_period"

    # --- Robust UC engine ---
    EPS_VIOL: float = Field(1e-5, gt=0.0)
    EPS_LOOSE_FACTOR: float = Field(100.0, ge=1.0)
    SCREENING: bool = True
    OUTER_APPROX: bool = True
    ONE_TREE: bool = True
    LOOSE_STRATEGY: bool = True
    MAX_ITERATIONS: int = Field(200, ge=1)
    POLICY_SLOPE_BOUND: float = Field(1e3, gt=0.0)
    LP_DUMP_DIR: Optional[str] = None  # debug: infeasible masters are written here

    # --- Simulation ---
    SEED: int = Field(20160601, ge=0, le=MAX_SEED)
    N_TRAJECTORIES: int = Field(100, ge=1)
    PENALTY_PRICE: float = Field(5000.0, gt=0.0)  # $/MWh
    LOOKAHEAD: int = Field(3, ge=0)
    CVAR_LEVEL: float = Field(0.1, gt=0.0, le=1.0)

    # --- Directories ---
    LOGS_DIR: str = os.path.join(PROJECT_ROOT, "logs")
    OUTPUT_DIR: str = os.path.join(PROJECT_ROOT, "output")

    @field_validator("LOGS_DIR", "OUTPUT_DIR")
    @classmethod
    def _absolute_dir(cls, value: str) -> str:
        return os.path.abspath(value)

    # --- Derived paths ---
    @property
    def ERROR_LOG_FILE(self) -> str:
        """Full path to the error log file."""
        return os.path.join(self.LOGS_DIR, "error.log")

    def with_overrides(self, **overrides) -> "Settings":
        """Returns a validated copy with the given fields replaced (None values are skipped)."""
        values = self.model_dump()
        values.update({key: value for key, value in overrides.items() if value is not None})
        return Settings(**values)


# --- Instantiate Settings and Handle Errors ---
try:
    settings = Settings()
except ValidationError as e:
    print("\n❌ ERROR: Failed to load or validate settings!")
    print("Please check your environment variables or the '.env' file.")
    print(f"    (.env expected location: {ENV_FILE_PATH})")
    print("\nMissing or invalid settings:")
    for error in e.errors():
        field = error['loc'][0] if error['loc'] else 'Unknown Field'
        print(f"  - {field}: {error['msg']}")
    sys.exit(2)


# --- Create Log/Output Directories ---
try:
    os.makedirs(settings.LOGS_DIR, exist_ok=True)
    os.makedirs(settings.OUTPUT_DIR, exist_ok=True)
except OSError as e:
    print(f"Warning: Could not create directories ({settings.LOGS_DIR}, {settings.OUTPUT_DIR}): {e}")
