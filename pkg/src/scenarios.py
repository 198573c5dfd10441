"""
Scenarios Module
Boundary-value problems on a pre-buckled clamped ribbon and detection of
transition points on their traces
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.ndimage import uniform_filter1d
from scipy.signal import find_peaks

from .energy_models import MODEL_IDS, CrossSection, MaterialParams, ModelOptions
from .errors import BranchLost, BucklingNotTriggered, SchemaError, SolverError
from .integrator import LoadSchedule, RibbonSimulator, RibbonSystem, SimulationState, SolverSettings
from .kinematics import (
    StateVector,
    initialize_frames,
    node_dofs,
    rest_configuration,
    theta_dof,
)
from .logger import get_logger

logger = get_logger(__name__)

SWEEP_KINDS = ('shear', 'twist', 'shear_twist', 'homotopy')
DEFAULT_SWEEP_MAX = {'shear': 0.5, 'twist': 4.0, 'shear_twist': 0.5, 'homotopy': 0.5}

BUCKLING_THRESHOLD = 1e-3
SMOOTHING_WINDOW = 5
PROMINENCE_FRACTION = 0.02
SNAP_SIGNIFICANCE = 0.05


@dataclass
class BenchmarkConfig:
    """
    Physical setup, loading protocol and solver controls of one benchmark run.

    Lengths are in metres, times in seconds, angles in radians. The width and
    thickness are given as W/L and L/b.
    """

    model: str = 'kirchhoff'
    length: float = 0.1
    width_ratio: float = 1.0 / 20.0
    slenderness: float = 100.0
    n_nodes: int = 45
    youngs_modulus: float = 10e9
    poisson_ratio: float = 0.5
    density: float = 1000.0
    inplane_ratio: Optional[float] = 64.0
    compression_ratio: float = 0.25
    compression_time: float = 2.0
    relax_time: float = 0.5
    sweep: str = 'shear'
    sweep_max: Optional[float] = None
    sweep_time: float = 4.95
    twist_total: float = np.pi
    direction: int = 1
    seed: int = 0
    perturbation: float = 0.025
    perturbation_sign: Optional[int] = None
    homotopy_target: Optional[float] = None
    homotopy_steps: int = 20
    homotopy_equilibration: float = 0.2
    branch_threshold: float = 0.1
    solver: SolverSettings = field(default_factory=SolverSettings)
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.model not in MODEL_IDS:
            raise SchemaError('model', f"unknown model {self.model!r}; expected one of {', '.join(MODEL_IDS)}")
        if self.sweep not in SWEEP_KINDS:
            raise SchemaError('sweep', f"unknown sweep {self.sweep!r}; expected one of {', '.join(SWEEP_KINDS)}")
        if self.n_nodes < 15:
            raise SchemaError('n_nodes', f"need at least 15 nodes, got {self.n_nodes}")
        for name in ('length', 'width_ratio', 'slenderness', 'youngs_modulus', 'density', 'sweep_time'):
            if not getattr(self, name) > 0:
                raise SchemaError(name, "must be positive")
        if not 0.0 <= self.compression_ratio < 1.0:
            raise SchemaError('compression_ratio', "must lie in [0, 1)")
        if self.direction not in (1, -1):
            raise SchemaError('direction', "must be +1 or -1")
        if self.perturbation_sign not in (None, 1, -1):
            raise SchemaError('perturbation_sign', "must be +1 or -1")
        if self.homotopy_target is not None and not self.homotopy_target > 0:
            raise SchemaError('homotopy_target', "must be positive")
        if self.inplane_ratio is not None and not self.inplane_ratio >= 1.0:
            raise SchemaError('inplane_ratio', "must be at least 1")
        if self.homotopy_steps < 1:
            raise SchemaError('homotopy_steps', "must be at least 1")
        if self.sweep_max is None:
            self.sweep_max = DEFAULT_SWEEP_MAX[self.sweep]

        if self.length / self.width < 2.0 or self.width / self.thickness < 5.0:
            message = (f"slenderness ordering violated: L/W = {self.length / self.width:.3g}, "
                       f"W/b = {self.width / self.thickness:.3g}")
            if message not in self.warnings:
                self.warnings.append(message)
                logger.warning(message)

    @property
    def width(self):
        return self.width_ratio * self.length

    @property
    def thickness(self):
        return self.length / self.slenderness

    @property
    def force_scale(self):
        """Y b^3 / L, the normalization of the reported shear force"""
        return self.youngs_modulus * self.thickness ** 3 / self.length

    @property
    def bending_scale(self):
        """Y I2 / L^2; proportional to W like every stiffness of the section"""
        return self.youngs_modulus * self.width * self.thickness ** 3 / (12.0 * self.length ** 2)

    def section(self, width_ratio=None):
        width = (width_ratio or self.width_ratio) * self.length
        return CrossSection(width, self.thickness, self.poisson_ratio, self.inplane_ratio)

    def material(self):
        return MaterialParams(self.youngs_modulus, self.poisson_ratio, None, self.density)

    def replace(self, **changes):
        changes.setdefault('solver', dataclasses.replace(self.solver))
        changes.setdefault('warnings', [])
        if 'sweep' in changes and 'sweep_max' not in changes:
            changes['sweep_max'] = None
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        values = dataclasses.asdict(self)
        values.pop('warnings')
        return values


@dataclass
class TraceRecord:
    control: float
    height: float
    height_abs: float
    shear_force: float
    energy: float
    step_index: int


@dataclass
class Trace:
    """Sweep output, one record per converged step"""

    control_name: str = 'shear'
    records: list = field(default_factory=list)
    stages: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.records)

    def append(self, record):
        self.records.append(record)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    @property
    def controls(self):
        return self.column('control')

    @property
    def heights(self):
        return self.column('height')

    @property
    def shear_forces(self):
        return self.column('shear_force')

    def is_monotone(self):
        steps = np.diff(self.controls)
        return bool(np.all(steps >= 0.0) or np.all(steps <= 0.0))


@dataclass
class Transitions:
    first: Optional[float] = None
    second: Optional[float] = None

    def to_dict(self):
        return {'first': self.first, 'second': self.second}


@dataclass
class SnapEvent:
    control: float
    pre_height: float
    post_height: float
    decays: bool


@dataclass
class RibbonRun:
    """A ribbon in the clamped benchmark rig, advanced phase by phase"""

    config: BenchmarkConfig
    system: RibbonSystem
    simulator: RibbonSimulator
    sim: SimulationState
    left_dofs: np.ndarray
    right_dofs: np.ndarray

    @property
    def mid_node(self):
        return self.config.n_nodes // 2

    @property
    def fixed_dofs(self):
        return np.concatenate([self.left_dofs, self.right_dofs])

    def midpoint_height(self, sim=None):
        sim = sim or self.sim
        return float(sim.state.positions[self.mid_node, 2])

    def midline_twist(self, sim=None):
        sim = sim or self.sim
        strains = self.system.strains(sim.state, sim.frames)
        return float(np.sum(np.abs(strains.tau - self.system.rest.natural_strains[:, 2])))

    def clamp_schedule(self, right_increment, duration, external_force=None):
        """Left clamp held, right clamp moved by ``right_increment`` (7 DOFs) over ``duration``"""
        increment = np.zeros(self.left_dofs.size + self.right_dofs.size)
        increment[self.left_dofs.size:] = right_increment
        return LoadSchedule.ramp(self.sim.state.q, self.fixed_dofs, increment, self.sim.time,
                                 duration, external_force)

    def record(self, control, sim, step_index, direction=1):
        energy, forces, _ = self.system.assemble(sim.state, sim.frames)
        y_dofs = self.right_dofs[[1, 5]]
        shear = -direction * float(np.sum(forces[y_dofs]))
        height = self.midpoint_height(sim) / self.config.length
        return TraceRecord(float(control), height, abs(height),
                           shear / self.config.force_scale, energy, step_index)

    def with_width(self, width_ratio):
        """Swap in a system with another width; geometry and state are kept"""
        self.system = RibbonSystem(self.system.rest, self.config.section(width_ratio),
                                   self.system.material, self.system.model, self.system.options)
        self.simulator.system = self.system
        return self


def clamp_dofs(n_nodes):
    """
    DOFs held by the two clamps: first and last two nodes plus the end twist angles.

    Returns:
        tuple: (left indices, right indices), each of length 7
    """
    left = np.concatenate([node_dofs(0), [theta_dof(0)], node_dofs(1)])
    right = np.concatenate([node_dofs(n_nodes - 2), [theta_dof(n_nodes - 2)], node_dofs(n_nodes - 1)])
    return left.astype(int), right.astype(int)


def build_ribbon(config, width_ratio=None):
    """
    Straight ribbon along x with its width along y, at rest.

    Returns:
        RibbonRun: Ready for the compression phase
    """
    positions = np.zeros((config.n_nodes, 3))
    positions[:, 0] = np.linspace(0.0, config.length, config.n_nodes)
    thetas = np.zeros(config.n_nodes - 1)
    rest = rest_configuration(positions)
    frames = initialize_frames(positions, thetas, d1_hint=(0.0, 1.0, 0.0))
    system = RibbonSystem(rest, config.section(width_ratio), config.material(), config.model, ModelOptions())
    simulator = RibbonSimulator(system, dataclasses.replace(config.solver))
    sim = SimulationState(StateVector.from_positions(positions, thetas), frames, 0.0, simulator.settings.h)
    left, right = clamp_dofs(config.n_nodes)
    return RibbonRun(config, system, simulator, sim, left, right)


def _right_increment(dx=0.0, dy=0.0, dtheta=0.0):
    # right clamp DOF order: x_{M-2}, y, z, theta_{M-2}, x_{M-1}, y, z
    return np.array([dx, dy, 0.0, dtheta, dx, dy, 0.0])


def run_compression(config):
    """
    Compress the clamped ribbon to the buckled arch.

    A transverse force at midspan picks the buckling direction while the
    clamps approach; it is removed for a final relaxation phase.

    Args:
        config (BenchmarkConfig): Benchmark setup

    Returns:
        RibbonRun: Pre-buckled ribbon

    Raises:
        BucklingNotTriggered: If the arch height stays below 1e-3 L
    """
    run = build_ribbon(config)
    if config.perturbation_sign is not None:
        sign = config.perturbation_sign
    else:
        sign = int(np.random.default_rng(config.seed).choice([-1, 1]))

    magnitude = sign * config.perturbation * config.bending_scale
    push = np.zeros(run.sim.state.n_dof)
    push[node_dofs(run.mid_node)[2]] = magnitude

    logger.info(f"Compressing {config.model} ribbon W/L={config.width_ratio:.4g} by "
                f"dL/L={config.compression_ratio:.3g} (perturbation sign {sign:+d})")
    shortening = -config.compression_ratio * config.length
    schedule = run.clamp_schedule(_right_increment(dx=shortening), config.compression_time, lambda t: push)
    run.sim = run.simulator.run(run.sim, schedule, run.sim.time + config.compression_time, phase='compression')

    hold = run.clamp_schedule(_right_increment(), 0.0)
    run.sim = run.simulator.run(run.sim, hold, run.sim.time + config.relax_time, phase='relax')

    height = run.midpoint_height() / config.length
    if config.compression_ratio > 0 and abs(height) < BUCKLING_THRESHOLD:
        logger.error(f"Compression ended with H_m/L = {height:.3e}")
        raise BucklingNotTriggered(f"midpoint height {height:.3e} L is below {BUCKLING_THRESHOLD:g} L")
    logger.info(f"Pre-buckled arch: H_m/L = {height:+.4f}")
    return run


def _sweep(run, trace, right_increment, control_max, duration, phase, control_start=0.0):
    """Ramp the right clamp and record one trace entry per converged step"""
    t_start = run.sim.time
    direction = run.config.direction

    def observe(sim, diagnostics):
        fraction = min(max((sim.time - t_start) / duration, 0.0), 1.0)
        control = control_start + fraction * (control_max - control_start)
        trace.append(run.record(control, sim, len(run.simulator.history), direction))

    schedule = run.clamp_schedule(right_increment, duration)
    try:
        run.sim = run.simulator.run(run.sim, schedule, t_start + duration, phase=phase, observer=observe)
    except SolverError as e:
        logger.error(f"{phase} sweep stopped at t={run.sim.time:.4g} after {len(trace)} records: {e}")
        e.trace = trace
        raise
    return trace


def _start_trace(run, control_name, control=0.0):
    width_ratio = run.system.section.width / run.config.length
    trace = Trace(control_name, metadata={'model': run.config.model, 'width_ratio': width_ratio})
    trace.append(run.record(control, run.sim, len(run.simulator.history), run.config.direction))
    return trace


def run_shear_sweep(prebuckled, config=None):
    """
    Move the right clamp sideways and trace the response.

    Args:
        prebuckled (RibbonRun): Output of run_compression (advanced in place)
        config (BenchmarkConfig): Overrides the run's config for the sweep settings

    Returns:
        Trace: Control is the transverse shear dW/L

    Raises:
        StepFloorExceeded: With the partial trace attached as ``trace``
    """
    config = config or prebuckled.config
    total = config.direction * config.sweep_max * config.length
    logger.info(f"Shear sweep to dW/L={config.sweep_max:g} ({'+' if config.direction > 0 else '-'}y)")
    trace = _start_trace(prebuckled, 'shear')
    return _sweep(prebuckled, trace, _right_increment(dy=total), config.sweep_max, config.sweep_time, 'shear')


def run_twist_sweep(prebuckled, config=None):
    """Rotate the right clamp about the ribbon axis; control is the clamp angle (rad)"""
    config = config or prebuckled.config
    total = config.direction * config.sweep_max
    logger.info(f"Twist sweep to {config.sweep_max:g} rad")
    trace = _start_trace(prebuckled, 'twist_rad')
    return _sweep(prebuckled, trace, _right_increment(dtheta=total), config.sweep_max, config.sweep_time, 'twist')


def run_shear_twist_sweep(prebuckled, config=None):
    """Shear and clamp twist ramped together at a fixed ratio; control is dW/L"""
    config = config or prebuckled.config
    shear = config.direction * config.sweep_max * config.length
    twist = config.direction * config.twist_total
    logger.info(f"Shear+twist sweep to dW/L={config.sweep_max:g} with {config.twist_total:.4g} rad")
    trace = _start_trace(prebuckled, 'shear')
    return _sweep(prebuckled, trace, _right_increment(dy=shear, dtheta=twist), config.sweep_max,
                  config.sweep_time, 'shear_twist')


def run_width_homotopy(config):
    """
    Carry the sheared S branch from ``config.width_ratio`` to ``config.homotopy_target``.

    Stage 1 shears the narrow ribbon onto the twisted branch, stage 2 widens it
    in geometric increments with the clamps held, stage 3 sweeps the shear back
    to zero at the target width.

    Returns:
        Trace: Stage-3 trace (control decreasing); all three stages under
        ``trace.stages``

    Raises:
        BranchLost: If the midline twist collapses during the width ramp
    """
    start = config.width_ratio
    target = config.homotopy_target or start
    run = run_compression(config)
    forward = run_shear_sweep(run, config)
    reference_twist = run.midline_twist()
    logger.info(f"Homotopy stage 1 done: midline twist {reference_twist:.4g}")

    widening = Trace('width_ratio', metadata={'model': config.model})
    widths = np.geomspace(start, target, config.homotopy_steps + 1)[1:] if target != start else []
    hold = None
    for width_ratio in widths:
        run.with_width(width_ratio)
        hold = run.clamp_schedule(_right_increment(), 0.0)
        run.sim = run.simulator.run(run.sim, hold, run.sim.time + config.homotopy_equilibration, phase='homotopy')
        widening.append(run.record(width_ratio, run.sim, len(run.simulator.history), config.direction))
        twist = run.midline_twist()
        logger.debug(f"W/L={width_ratio:.4g}: midline twist {twist:.4g}")
        if twist < config.branch_threshold * reference_twist:
            logger.error(f"Branch lost at W/L={width_ratio:.4g}")
            raise BranchLost(f"midline twist fell to {twist:.3e} (stage 1: {reference_twist:.3e}) "
                             f"at W/L={width_ratio:.4g}", trace=widening)

    total = -config.direction * config.sweep_max * config.length
    reverse = _start_trace(run, 'shear', config.sweep_max)
    reverse.metadata['width_ratio'] = target
    _sweep(run, reverse, _right_increment(dy=total), 0.0, config.sweep_time, 'reverse', config.sweep_max)
    reverse.stages = {'forward': forward, 'width': widening, 'reverse': reverse}
    reverse.metadata['phases'] = run.simulator.summary()
    reverse.metadata['history'] = run.simulator.history
    logger.info(f"Homotopy to W/L={target:.4g} finished with {len(reverse)} records")
    return reverse


def detect_transitions(trace):
    """
    U->US and US->S points of a shear trace.

    The shear force is sorted by control, smoothed with a 5-sample moving
    average and searched for its first peak and the first trough after it.

    Args:
        trace (Trace): Shear or combined trace

    Returns:
        Transitions: Control values (None when absent)
    """
    if len(trace) < 3:
        return Transitions()
    controls = trace.controls
    order = np.argsort(controls, kind='stable')
    x = controls[order]
    force = trace.shear_forces[order]
    smooth = uniform_filter1d(force, size=min(SMOOTHING_WINDOW, force.size), mode='nearest')
    span = float(np.max(smooth) - np.min(smooth))
    if span <= 0.0:
        return Transitions()

    prominence = PROMINENCE_FRACTION * span
    peaks, _ = find_peaks(smooth, prominence=prominence)
    if peaks.size == 0:
        return Transitions()
    first = int(peaks[0])
    troughs, _ = find_peaks(-smooth, prominence=prominence)
    later = troughs[troughs > first]
    second = float(x[later[0]]) if later.size else None
    return Transitions(float(x[first]), second)


def detect_snap(trace):
    """
    Snap-through of the arch: signed height jumps to the other side.

    Heights below 5% of the largest |H_m| are ignored when looking for the
    sign change.

    Returns:
        SnapEvent or None: None when the height never changes sign
    """
    heights = trace.heights
    if heights.size < 2:
        return None
    scale = float(np.max(np.abs(heights)))
    if scale == 0.0:
        return None
    significant = np.flatnonzero(np.abs(heights) > SNAP_SIGNIFICANCE * scale)
    signs = np.sign(heights[significant])
    flips = np.flatnonzero(signs[1:] != signs[:-1])
    if flips.size == 0:
        return None
    before = significant[flips[0]]
    after = significant[flips[0] + 1]
    tail = np.abs(heights[after:])
    decays = bool(tail[-1] < tail.max())
    return SnapEvent(float(trace.controls[after]), float(heights[before]), float(heights[after]), decays)


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    trace: Trace
    transitions: Transitions
    snap: Optional[SnapEvent]
    phases: dict
    prebuckled_height: float
    diagnostics: list = field(default_factory=list)

    @property
    def steps(self):
        return sum(p['steps'] for p in self.phases.values())

    @property
    def iterations(self):
        return sum(p['iterations'] for p in self.phases.values())


def run_benchmark(config):
    """
    Compression followed by the sweep named in ``config.sweep``.

    Returns:
        BenchmarkResult: Trace, detected events and per-phase counters
    """
    if config.sweep == 'homotopy':
        trace = run_width_homotopy(config)
        phases = trace.metadata.pop('phases', {})
        history = trace.metadata.pop('history', [])
        height = trace.stages['forward'].records[0].height
    else:
        run = run_compression(config)
        height = run.midpoint_height() / config.length
        sweep = {'shear': run_shear_sweep, 'twist': run_twist_sweep, 'shear_twist': run_shear_twist_sweep}
        trace = sweep[config.sweep](run, config)
        phases = run.simulator.summary()
        history = run.simulator.history

    transitions = detect_transitions(trace) if config.sweep != 'twist' else Transitions()
    snap = detect_snap(trace)
    if transitions.first is not None:
        logger.info(f"U->US at {transitions.first:.4f}, US->S at "
                    f"{'absent' if transitions.second is None else f'{transitions.second:.4f}'}")
    return BenchmarkResult(config, trace, transitions, snap, phases, height, history)
