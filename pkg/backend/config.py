"""
Configuration settings for the HST k-server simulator
"""
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Literal


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Logging
    LOG_LEVEL: str = "INFO"

    # Parameter derivation
    COUNT_DUMMIES_IN_N: bool = True
    SUBTREE_MEASURE: Literal["nodes", "leaves"] = "nodes"

    # Numerics
    RELATIVE_TOLERANCE: float = 1e-9
    ABSOLUTE_TOLERANCE: float = 1e-12

    # Run guards
    MAX_REPEAT_ROUNDS: int = 100_000
    MAX_ITERATIONS_PER_REQUEST: int = 5_000_000

    # Offline oracle
    ORACLE_NODE_CAP: int = 200_000
    BRUTE_FORCE_CAP: int = 4096

    # Harness
    DEFAULT_AUDIT_MODE: Literal["inline", "post", "off"] = "post"
    REPORT_SCHEMA: str = "hst-kserver-report v1"
    TRACE_FILENAME: str = "trace.jsonl"
    REPORT_JSON_FILENAME: str = "report.json"
    REPORT_CSV_FILENAME: str = "report.csv"
    CERTIFICATE_FILENAME: str = "opt_certificate.json"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False
    )

    def tolerance(self, scale: float) -> float:
        """Absolute slack allowed when comparing quantities of the given magnitude"""
        return self.ABSOLUTE_TOLERANCE + self.RELATIVE_TOLERANCE * abs(scale)


# Singleton instance
settings = Settings()
