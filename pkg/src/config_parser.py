"""
Benchmark Document Parser
Reads KEY=VALUE benchmark documents (dotenv syntax) with explicit units
into BenchmarkConfig objects
"""

import io
import re
from fractions import Fraction
from pathlib import Path

from dotenv import dotenv_values

from .errors import ConfigurationError, SchemaError, UnitsError
from .integrator import SolverSettings
from .logger import get_logger
from .scenarios import BenchmarkConfig

logger = get_logger(__name__)

UNITS = {
    'length': {'m': 1.0, 'cm': 1e-2, 'mm': 1e-3, 'um': 1e-6},
    'pressure': {'Pa': 1.0, 'kPa': 1e3, 'MPa': 1e6, 'GPa': 1e9},
    'density': {'kg/m^3': 1.0, 'kg/m3': 1.0, 'g/cm^3': 1e3},
    'time': {'s': 1.0, 'ms': 1e-3},
    'angle': {'rad': 1.0, 'deg': 3.141592653589793 / 180.0},
    'force': {'N': 1.0, 'mN': 1e-3},
    'velocity': {'m/s': 1.0, 'mm/s': 1e-3},
}

# document key -> (BenchmarkConfig field, kind); kind is a unit family or a plain type
FIELDS = {
    'model': ('model', 'choice'),
    'sweep': ('sweep', 'choice'),
    'length': ('length', 'length'),
    'l': ('length', 'length'),
    'w_over_l': ('width_ratio', 'ratio'),
    'l_over_b': ('slenderness', 'ratio'),
    'inplane_ratio': ('inplane_ratio', 'ratio'),
    'mesh': ('n_nodes', 'int'),
    'n_nodes': ('n_nodes', 'int'),
    'youngs_modulus': ('youngs_modulus', 'pressure'),
    'y': ('youngs_modulus', 'pressure'),
    'poisson_ratio': ('poisson_ratio', 'ratio'),
    'nu': ('poisson_ratio', 'ratio'),
    'density': ('density', 'density'),
    'compression': ('compression_ratio', 'ratio'),
    'compression_time': ('compression_time', 'time'),
    'relax_time': ('relax_time', 'time'),
    'sweep_time': ('sweep_time', 'time'),
    'twist_total': ('twist_total', 'angle'),
    'direction': ('direction', 'direction'),
    'seed': ('seed', 'int'),
    'perturbation': ('perturbation', 'ratio'),
    'perturbation_sign': ('perturbation_sign', 'int'),
    'homotopy_target': ('homotopy_target', 'ratio'),
    'homotopy_steps': ('homotopy_steps', 'int'),
    'homotopy_equilibration': ('homotopy_equilibration', 'time'),
    'branch_threshold': ('branch_threshold', 'ratio'),
}

SOLVER_FIELDS = {
    'h': ('h', 'time'),
    'h_min': ('h_min', 'time'),
    'h_max': ('h_max', 'time'),
    'delta_f': ('delta_F', 'force'),
    'delta_u': ('delta_u', 'velocity'),
    'delta_stable': ('delta_stable', 'length'),
    'n_stable': ('n_stable', 'int'),
    'max_newton_iters': ('max_newton_iters', 'int'),
    'k_max': ('k_max', 'ratio'),
    'bc_method': ('bc_method', 'choice'),
}

PRESETS = {
    'shear': {'sweep': 'shear'},
    'twist': {'sweep': 'twist', 'width_ratio': 1.0 / 12.0},
    'shear_twist': {'sweep': 'shear_twist', 'width_ratio': 1.0 / 12.0},
    'homotopy': {'sweep': 'homotopy', 'model': 'sano', 'width_ratio': 1.0 / 12.0, 'homotopy_target': 1.0 / 3.0},
    'bench': {'sweep': 'shear', 'width_ratio': 1.0 / 6.0},
}

DIRECTIONS = {'pos': 1, 'neg': -1, '+1': 1, '-1': -1, '1': 1}

_VALUE = re.compile(r'^\s*([-+]?[0-9.eE+\-/]+)\s*(\S*)\s*$')


class DocumentParser:
    """Converts raw document values into typed BenchmarkConfig fields"""

    @staticmethod
    def parse_number(key, text):
        try:
            return float(Fraction(text.strip()))
        except (ValueError, ZeroDivisionError):
            raise SchemaError(key, f"expected a number or fraction, got {text!r}")

    @staticmethod
    def parse_quantity(key, text, family):
        """
        Parse '<number> <unit>' into SI.

        Raises:
            UnitsError: If the unit is missing or not in the family
        """
        match = _VALUE.match(text)
        if not match:
            raise SchemaError(key, f"cannot read quantity {text!r}")
        number, unit = match.groups()
        if not unit:
            raise UnitsError(key, f"missing unit; expected one of {', '.join(UNITS[family])}")
        if unit not in UNITS[family]:
            raise UnitsError(key, f"unknown {family} unit {unit!r}; expected one of {', '.join(UNITS[family])}")
        return DocumentParser.parse_number(key, number) * UNITS[family][unit]

    @staticmethod
    def parse_value(key, text, kind):
        if kind == 'choice':
            return text.strip().lower()
        if kind == 'int':
            try:
                return int(text.strip())
            except ValueError:
                raise SchemaError(key, f"expected an integer, got {text!r}")
        if kind == 'ratio':
            return DocumentParser.parse_number(key, text)
        if kind == 'direction':
            value = text.strip().lower()
            if value not in DIRECTIONS:
                raise SchemaError(key, f"expected pos or neg, got {text!r}")
            return DIRECTIONS[value]
        return DocumentParser.parse_quantity(key, text, kind)


def _read_document(source):
    if isinstance(source, Path):
        if not source.is_file():
            raise ConfigurationError(f"benchmark document not found: {source}")
        return dotenv_values(dotenv_path=source)
    if '=' in source or '\n' in source or not source.strip():
        return dotenv_values(stream=io.StringIO(source))
    return _read_document(Path(source))


def parse_config(source, overrides=None):
    """
    Build a BenchmarkConfig from a document path or text.

    Unset fields take the BenchmarkConfig defaults (L = 0.1 m, Y = 10 GPa,
    nu = 0.5, M = 45). A ``preset`` key applies a named preset first;
    ``overrides`` (already typed, keyed by BenchmarkConfig field) win over
    the document.

    Args:
        source (str or Path): Path to a document, or the document text
        overrides (dict): Optional field overrides, e.g. from the CLI

    Returns:
        BenchmarkConfig: Validated config; ordering warnings in ``.warnings``

    Raises:
        SchemaError: On unknown keys or malformed values
        UnitsError: On missing or unknown units
    """
    raw = _read_document(source)
    fields = {}
    solver = {}

    preset = None
    for key, value in raw.items():
        if key.strip().lower() == 'preset':
            preset = (value or '').strip().lower()
            if preset not in PRESETS:
                raise SchemaError('preset', f"unknown preset {value!r}; expected one of {', '.join(PRESETS)}")
            fields.update(PRESETS[preset])

    for key, value in raw.items():
        name = key.strip().lower()
        if name == 'preset':
            continue
        if value is None or not value.strip():
            raise SchemaError(key, "missing value")
        if name in FIELDS:
            target, kind = FIELDS[name]
            fields[target] = DocumentParser.parse_value(key, value, kind)
        elif name in SOLVER_FIELDS:
            target, kind = SOLVER_FIELDS[name]
            solver[target] = DocumentParser.parse_value(key, value, kind)
        elif name == 'sweep_max':
            fields['sweep_max'] = value
        else:
            raise SchemaError(key, "unknown field")

    for key, value in (overrides or {}).items():
        if value is not None:
            fields[key] = value

    if isinstance(fields.get('sweep_max'), str):
        # the sweep kind decides whether the range is an angle or dW/L
        twist = fields.get('sweep', 'shear') == 'twist'
        text = fields['sweep_max']
        fields['sweep_max'] = (DocumentParser.parse_quantity('sweep_max', text, 'angle') if twist
                               else DocumentParser.parse_number('sweep_max', text))

    try:
        settings = SolverSettings(**solver).validate()
    except TypeError as e:
        raise SchemaError('solver', str(e))
    config = BenchmarkConfig(solver=settings, **fields)
    logger.debug(f"Parsed benchmark document: model={config.model}, sweep={config.sweep}, "
                 f"W/L={config.width_ratio:.4g}, preset={preset}")
    return config


def preset_config(name, **overrides):
    """BenchmarkConfig for a named preset with field overrides"""
    if name not in PRESETS:
        raise SchemaError('preset', f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    fields = dict(PRESETS[name])
    fields.update({k: v for k, v in overrides.items() if v is not None})
    return BenchmarkConfig(**fields)
