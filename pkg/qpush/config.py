from typing import List

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Environment
    ENVIRONMENT: str = "development"
    LOG_LEVEL: str = "INFO"

    # Output
    OUTPUT_DIR: str = "runs"

    # Bit accounting (full-precision scalars are counted at 54 bits)
    NORM_BITS: int = 54
    SCALAR_BITS: int = 54

    # Replica audit
    AUDIT_INTERVAL: int = 50
    REPLICA_TOLERANCE: float = 1e-12

    # Spectral estimation
    SPECTRAL_HORIZON: int = 200
    SPECTRAL_TOL: float = 1e-12

    # Runs
    DEFAULT_SEED: int = 1
    VALIDATION_ROUNDS: int = 100

    # Input caps (configs and API requests)
    MAX_NODES: int = 200
    MAX_DIM: int = 4096
    MAX_ROUNDS: int = 100_000
    MAX_SPECTRAL_HORIZON: int = 10_000

    # HTTP API
    API_TITLE: str = "Quantized Push-Sum Simulator API"
    CORS_ORIGINS: List[str] = [
        "http://localhost:3000",
        "http://127.0.0.1:3000",
        "http://localhost:5173",
        "http://127.0.0.1:5173",
    ]

    model_config = SettingsConfigDict(
        env_prefix="QPUSH_",
        env_file=[".env", "qpush/.env"],  # Check both root and package directory
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
