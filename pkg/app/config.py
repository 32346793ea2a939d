from dotenv import load_dotenv
from pydantic import AliasChoices, Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional

load_dotenv()

class Settings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="KMSGRAPH_", env_file=".env", extra="ignore")

    # Traces
    SUPPORT_EPSILON: float = 1e-12
    TRACE_SUM_TOLERANCE: float = 1e-12

    # Spectral computations
    SPECTRAL_TOLERANCE: float = 1e-12
    SPECTRAL_MAX_ITERATIONS: int = 1_000_000
    EIGENVALUE_MATCH_TOLERANCE: float = 1e-9
    NULLSPACE_TOLERANCE: float = 1e-7
    AVERAGING_TOLERANCE: float = 1e-9
    EXTREME_DISTINCT_TOLERANCE: float = 1e-8

    # States
    ADMISSIBILITY_SLACK: float = 1e-12
    SERIES_TOLERANCE: float = 1e-10
    SERIES_MAX_TERMS: int = 200_000

    # Fock space verification
    FOCK_DIMENSION_CAP: int = 200_000
    DEFAULT_SEED: int = 0
    DEFAULT_TRIALS: int = 200

    # CLI / server
    SWEEP_WORKERS: int = 4
    LOG_LEVEL: str = "WARNING"
    NO_COLOR: Optional[str] = Field(default=None, validation_alias=AliasChoices("NO_COLOR", "KMSGRAPH_NO_COLOR"))
    HOST: str = "0.0.0.0"
    PORT: int = 8000

    @property
    def use_color(self) -> bool:
        """Honour the NO_COLOR convention (any value disables colour)"""
        return self.NO_COLOR is None

settings = Settings()
