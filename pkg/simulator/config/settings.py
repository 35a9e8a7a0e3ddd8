"""
Configuration settings for the cache-aided MIMO simulator.
"""

import logging
import os

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

# Load environment variables from .env file in the project root
config_dir = os.path.dirname(os.path.abspath(__file__))  # config directory
simulator_dir = os.path.dirname(config_dir)  # simulator directory
project_root = os.path.dirname(simulator_dir)  # project root directory
env_path = os.path.join(project_root, ".env")

if os.path.exists(env_path):
    load_dotenv(env_path)
    logger.debug(f"Loaded .env file from: {env_path}")
else:
    logger.debug(f"No .env file at {env_path}, using process environment only")


class Config:
    """Base configuration class."""

    VERSION = "1.0.0"

    # Logging
    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper()

    # Monte Carlo settings
    SEED = int(os.getenv("SIM_SEED", "0"))
    THREADS = int(os.getenv("SIM_THREADS", str(os.cpu_count() or 1)))
    TRIALS = int(os.getenv("SIM_TRIALS", "1000"))

    # Output
    OUTPUT_DIR = os.getenv("SIM_OUTPUT_DIR", "results")

    # Sweep evaluation
    LARGE_SYSTEM_K = float(os.getenv("LARGE_SYSTEM_K", "1e6"))
    FINITE_K = int(os.getenv("FINITE_K", "64"))

    # Regularizer search range (normalized xi = alpha / M)
    XI_MIN = float(os.getenv("XI_MIN", "1e-4"))
    XI_MAX = float(os.getenv("XI_MAX", "1e2"))

    @classmethod
    def validate_config(cls):
        """Validate that the configuration is usable."""
        errors = []

        if cls.LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL has an unknown value: {cls.LOG_LEVEL}")

        if cls.THREADS < 1:
            errors.append(f"SIM_THREADS must be at least 1, got {cls.THREADS}")

        if cls.TRIALS < 1:
            errors.append(f"SIM_TRIALS must be at least 1, got {cls.TRIALS}")

        if cls.SEED < 0 or cls.SEED >= 2**64:
            errors.append(f"SIM_SEED must be an unsigned 64-bit integer, got {cls.SEED}")

        if cls.FINITE_K < 2:
            errors.append(f"FINITE_K must be at least 2, got {cls.FINITE_K}")

        if not 0 < cls.XI_MIN < cls.XI_MAX:
            errors.append(
                f"XI_MIN/XI_MAX must satisfy 0 < XI_MIN < XI_MAX, got {cls.XI_MIN}/{cls.XI_MAX}"
            )

        return errors


class DevelopmentConfig(Config):
    """Development configuration."""

    LOG_LEVEL = os.getenv("LOG_LEVEL", "DEBUG").upper()


class ProductionConfig(Config):
    """Production configuration."""


class TestingConfig(Config):
    """Testing configuration."""

    TESTING = True
    THREADS = 1
    TRIALS = 200


# Configuration mapping
config = {
    "development": DevelopmentConfig,
    "production": ProductionConfig,
    "testing": TestingConfig,
    "default": ProductionConfig,
}


def get_config(config_name=None):
    """Get configuration class based on environment."""
    if config_name is None:
        config_name = os.getenv("SIM_CONFIG", "default")

    return config.get(config_name, ProductionConfig)
