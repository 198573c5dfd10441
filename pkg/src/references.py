"""
Reference Data Module
Read-only access to the shipped table of published shift percentages,
absolute errors and derived FEA critical shears
"""

import json
from fractions import Fraction
from pathlib import Path

from .config import config
from .errors import ConfigurationError
from .logger import get_logger

logger = get_logger(__name__)

TRANSITIONS = ('U_US', 'US_S')


def width_key(width_ratio):
    """Table key of a width ratio, e.g. 0.0833 -> '1/12'"""
    return str(Fraction(float(width_ratio)).limit_denominator(100))


class ReferenceData:
    """
    Reference table implementing the Singleton pattern.
    Loaded lazily from RIBSIM_REFERENCE on first use.
    """

    _instance = None

    def __new__(cls):
        """Singleton pattern implementation"""
        if cls._instance is None:
            cls._instance = super(ReferenceData, cls).__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._table = None
        self.path = None
        self._initialized = True

    def load(self, path=None):
        """
        Load (or reload) the table.

        Args:
            path (str or Path): Defaults to config.REFERENCE_PATH

        Raises:
            ConfigurationError: If the file is missing or not valid JSON
        """
        path = Path(path or config.REFERENCE_PATH)
        try:
            with open(path, encoding='utf-8') as handle:
                self._table = json.load(handle)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigurationError(f"cannot load reference data {path}: {e}") from e
        self.path = path
        logger.debug(f"Loaded reference data version {self._table.get('version')} from {path}")
        return self

    @property
    def table(self):
        if self._table is None:
            self.load()
        return self._table

    def _lookup(self, section, quantity, transition, model, width_ratio):
        entries = self.table[section][quantity].get(transition, {}).get(model.lower(), {})
        return entries.get(width_key(width_ratio))

    def shift_percent(self, transition, model, width_ratio):
        """Published -shift % vs the W/L = 1/20 baseline, or None"""
        return self._lookup('published', 'shift_percent', transition, model, width_ratio)

    def abs_error(self, transition, model, width_ratio):
        """Published absolute error against FEA, or None"""
        return self._lookup('published', 'abs_error', transition, model, width_ratio)

    def fea_critical_shear(self, transition, width_ratio):
        """Derived FEA critical dW/L, or None"""
        return self._lookup('derived', 'critical_shear', transition, 'fea', width_ratio)

    def efficiency(self, n_nodes, model, width_ratio):
        rows = self.table['published']['efficiency'].get(str(n_nodes), {}).get(model.lower(), {})
        return rows.get(width_key(width_ratio))


# Global reference table
references = ReferenceData()
