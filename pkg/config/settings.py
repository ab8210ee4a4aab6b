from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional


class Settings(BaseSettings):
    """
    Centralized numerical defaults for the analysis library and CLI.
    Every value can be overridden with a BDJUMPS_-prefixed environment
    variable or a .env file next to the working directory.
    """

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # Series / classification
    TOL: float = 1e-10
    N_MAX_FLOOR: int = 1000
    N_MAX_FACTOR: int = 10
    OVERFLOW_GUARD: float = 1e300
    POWER_ITER_CAP: int = 1_000_000

    # Stationary distribution
    KMAX_CAP: int = 10_000
    TAIL_MASS_TARGET: float = 1e-12

    # Relative widening of the total-rate bounds kappa, bigK
    RATE_MARGIN: float = 1e-6

    # Simulation
    SEED: int = 20240601
    EXCURSIONS: int = 100_000
    STEP_GUARD: int = 10_000_000
    WORKERS: int = 1

    # Validation: largest offspring-vector count enumerated term by term
    OFFSPRING_ENUM_LIMIT: int = 20_000

    # Input / output
    CSV_DIGITS: int = 17
    MAX_MODEL_FILE_MB: float = 1.0

    model_config = SettingsConfigDict(
        env_prefix='BDJUMPS_',
        env_file='.env',
        env_file_encoding='utf-8',
        case_sensitive=True,
        extra='ignore'
    )

    def default_n_max(self, prefix_len: int, period: int) -> int:
        """Series length used when the caller does not pass n_max."""
        return self.N_MAX_FACTOR * (prefix_len + period) + self.N_MAX_FLOOR


# Singleton instance
settings = Settings()
