"""
Trace Files
Delimited trace output, the diagnostics stream and the run manifest sidecar
"""

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path

import pytz

from .errors import IoError
from .logger import get_logger
from .scenarios import Trace, TraceRecord

logger = get_logger(__name__)

TRACE_COLUMNS = ('control', 'H_m_signed_norm', 'H_m_abs_norm', 'F_shear_norm', 'energy_J', 'step_index')
DIAGNOSTIC_COLUMNS = ('t', 'h', 'iterations', 'residual_norm', 'regularization', 'attempts')
MANIFEST_SUFFIX = '.manifest.json'


def config_hash(config):
    """SHA-256 of the canonical JSON form of a BenchmarkConfig"""
    text = json.dumps(config.as_dict(), sort_keys=True, default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


@dataclass
class RunManifest:
    """Provenance of one trace file"""

    config_hash: str
    model: str
    n_nodes: int
    version: str
    wall_clock: float = 0.0
    phases: dict = field(default_factory=dict)
    control: str = 'shear'
    created_at: str = ''
    width_ratio: float = None

    @classmethod
    def for_result(cls, result, wall_clock=None):
        from . import __version__

        phases = result.phases
        if wall_clock is None:
            wall_clock = sum(p.get('wall_time', 0.0) for p in phases.values())
        return cls(config_hash(result.config), result.config.model, result.config.n_nodes,
                   __version__, wall_clock, phases, result.trace.control_name,
                   width_ratio=result.trace.metadata.get('width_ratio', result.config.width_ratio))


def manifest_path(trace_path):
    trace_path = Path(trace_path)
    return trace_path.with_name(trace_path.name + MANIFEST_SUFFIX)


def _format(value):
    return f"{value:.12e}"


def write_trace(trace, manifest, path):
    """
    Write a trace as CSV plus its manifest sidecar.

    The CSV holds only deterministic content, so identical runs give
    identical bytes; the creation time goes to the sidecar.

    Args:
        trace (Trace): Non-empty trace
        manifest (RunManifest): Provenance record
        path (str or Path): Destination of the CSV

    Returns:
        Path: The CSV path

    Raises:
        IoError: If the trace is empty or the files cannot be written
    """
    if len(trace) == 0:
        raise IoError("refusing to write an empty trace")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(TRACE_COLUMNS)
            for record in trace.records:
                writer.writerow([_format(record.control), _format(record.height), _format(record.height_abs),
                                 _format(record.shear_force), _format(record.energy), record.step_index])

        sidecar = asdict(manifest)
        sidecar['created_at'] = datetime.now(pytz.utc).isoformat()
        sidecar['trace_file'] = path.name
        with open(manifest_path(path), 'w', encoding='utf-8') as handle:
            json.dump(sidecar, handle, indent=2, sort_keys=True, default=str)
    except OSError as e:
        logger.error(f"Could not write trace {path}: {e}")
        raise IoError(f"could not write {path}: {e}") from e

    logger.info(f"Wrote {len(trace)} records to {path}")
    return path


def read_trace(path):
    """
    Read a trace written by write_trace.

    Returns:
        Trace: Records, with the manifest (when present) under
        ``metadata['manifest']``

    Raises:
        IoError: If the file is missing or malformed
    """
    path = Path(path)
    try:
        with open(path, newline='', encoding='utf-8') as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or tuple(header) != TRACE_COLUMNS:
                raise IoError(f"{path} is not a trace file (header {header})")
            records = [TraceRecord(float(row[0]), float(row[1]), float(row[2]), float(row[3]),
                                   float(row[4]), int(row[5])) for row in reader if row]
    except OSError as e:
        raise IoError(f"could not read {path}: {e}") from e
    except (ValueError, IndexError) as e:
        raise IoError(f"malformed row in {path}: {e}") from e

    metadata = {}
    sidecar = manifest_path(path)
    if sidecar.is_file():
        with open(sidecar, encoding='utf-8') as handle:
            metadata['manifest'] = json.load(handle)
    manifest = metadata.get('manifest', {})
    for key in ('model', 'width_ratio'):
        if manifest.get(key) is not None:
            metadata[key] = manifest[key]
    control = manifest.get('control', 'shear')
    return Trace(control, records, metadata=metadata)


def write_diagnostics(history, path):
    """Per-step solver records (StepDiagnostics) as CSV"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.DictWriter(handle, fieldnames=DIAGNOSTIC_COLUMNS, lineterminator='\n')
            writer.writeheader()
            for diagnostics in history:
                writer.writerow(diagnostics.to_dict())
    except OSError as e:
        raise IoError(f"could not write {path}: {e}") from e
    return path
