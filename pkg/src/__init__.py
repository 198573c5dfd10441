"""
RibSim Package
Discrete elastic ribbon simulation: kinematics, ribbon energy models,
banded implicit time stepping and the clamped-ribbon benchmarks
"""

import os

__version__ = "1.0.0"

from .config import config

# native thread pools read these once, when numpy is first loaded
for _name, _value in config.thread_environment().items():
    os.environ.setdefault(_name, _value)

from .logger import get_logger
from .errors import RibbonError
from .energy_models import MODEL_IDS, CrossSection, MaterialParams, evaluate_model
from .integrator import RibbonSimulator, RibbonSystem, SolverSettings
from .scenarios import BenchmarkConfig, detect_snap, detect_transitions, run_benchmark
from .config_parser import parse_config, preset_config
from .references import references

__all__ = [
    'config', 'get_logger', 'RibbonError', 'MODEL_IDS', 'CrossSection', 'MaterialParams',
    'evaluate_model', 'RibbonSimulator', 'RibbonSystem', 'SolverSettings', 'BenchmarkConfig',
    'detect_snap', 'detect_transitions', 'run_benchmark', 'parse_config', 'preset_config',
    'references',
]
