"""
Configuration Module
Loads and validates process-level settings for the ribbon simulation engine
"""

import os
from dotenv import load_dotenv
from pathlib import Path

# Load environment variables from .env file
env_path = Path(__file__).parent.parent / '.env'
load_dotenv(dotenv_path=env_path)

DEFAULT_REFERENCE_PATH = Path(__file__).parent / 'data' / 'fea_reference.json'


class Config:
    """
    Configuration class implementing the Singleton pattern.
    Holds settings that apply to the whole process (logging, threading,
    output locations). Physical benchmark parameters live in BenchmarkConfig.
    """

    _instance = None

    def __new__(cls):
        """Singleton pattern implementation"""
        if cls._instance is None:
            cls._instance = super(Config, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        """Initialize configuration from environment variables"""
        if self._initialized:
            return

        # Logging Configuration
        self.LOG_LEVEL = os.getenv('RIBSIM_LOG_LEVEL', 'INFO')
        self.LOG_FILE = os.getenv('RIBSIM_LOG_FILE', 'logs/ribsim.log')

        # Parallelism: BLAS thread pools and batch worker processes
        self._threads_raw = os.getenv('RIBSIM_THREADS', '')

        # Output and reference data
        self.OUT_DIR = os.getenv('RIBSIM_OUT_DIR', 'results')
        self.REFERENCE_PATH = os.getenv('RIBSIM_REFERENCE', str(DEFAULT_REFERENCE_PATH))

        self._initialized = True

    @property
    def THREADS(self):
        """
        Worker cap taken from RIBSIM_THREADS.

        Returns:
            int: Positive thread/process count (CPU count when unset)
        """
        if self._threads_raw.strip():
            try:
                return max(1, int(self._threads_raw))
            except ValueError:
                pass
        return os.cpu_count() or 1

    def thread_environment(self):
        """
        Environment variables that cap native thread pools.
        Must be exported before numpy is first imported.

        Returns:
            dict: Variable name -> value (empty when RIBSIM_THREADS is unset)
        """
        if not self._threads_raw.strip():
            return {}
        value = str(self.THREADS)
        return {
            'OMP_NUM_THREADS': value,
            'OPENBLAS_NUM_THREADS': value,
            'MKL_NUM_THREADS': value,
        }

    def validate(self):
        """
        Validate process-level settings.

        Raises:
            ValueError: If any setting is invalid
        """
        errors = []

        if self.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            errors.append(f"RIBSIM_LOG_LEVEL must be a logging level name, got {self.LOG_LEVEL!r}")

        if self._threads_raw.strip():
            try:
                if int(self._threads_raw) < 1:
                    errors.append("RIBSIM_THREADS must be a positive integer")
            except ValueError:
                errors.append(f"RIBSIM_THREADS must be an integer, got {self._threads_raw!r}")

        if not Path(self.REFERENCE_PATH).is_file():
            errors.append(f"RIBSIM_REFERENCE does not point to a file: {self.REFERENCE_PATH}")

        if errors:
            raise ValueError("Configuration validation failed:\n" + "\n".join(f"  - {e}" for e in errors))

        return True

    def __repr__(self):
        return (
            f"Config(LOG_LEVEL={self.LOG_LEVEL}, "
            f"THREADS={self.THREADS}, "
            f"OUT_DIR={self.OUT_DIR})"
        )


# Global config instance
config = Config()
