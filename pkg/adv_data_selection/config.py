"""
Configuration module for adversarial data-selection training.

This module handles loading process-level settings from environment variables
(and an optional .env file) and provides a cached settings object used by the
CLI, the logging setup and the evaluation helpers. Run-level configuration
(what to train and how) lives in the schema package instead.
"""

from functools import lru_cache

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load environment variables from .env file if it exists
load_dotenv()


class Settings(BaseSettings):
    """Process settings loaded from environment variables prefixed with ADS_."""

    # Logging Configuration
    log_level: str = "INFO"
    log_serialize: bool = False

    # Evaluation Configuration
    eval_chunk_size: int = 512
    gradcheck_tolerance: float = 1e-4

    # Application Configuration
    app_name: str = "Adversarial Data Selection"

    model_config = SettingsConfigDict(env_prefix="ADS_", env_file=".env", extra="ignore")


@lru_cache()
def get_settings() -> Settings:
    """
    Get process settings.

    Returns:
        Settings object with configuration values
    """
    return Settings()
