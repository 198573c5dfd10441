"""
Integrator Module
Adaptive implicit Euler with Newton-Raphson iterations and a regularized
banded linear solve
"""

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg.lapack import dgbtrf, dgbtrs
from scipy.sparse.linalg import LinearOperator, onenormest

from .assembly import BandedSystem, BoundaryConditions, _leading_edge_stretch, apply_bc, assemble
from .energy_models import ModelOptions, evaluate_model
from .errors import (
    ConfigurationError,
    KinematicsError,
    ModelDomainError,
    SolveFailed,
    StepFloorExceeded,
)
from .kinematics import StateVector, element_strains, frames_for_state
from .logger import get_logger

logger = get_logger(__name__)

BC_METHODS = ('eliminate', 'penalty')
FORCE_TOLERANCE = 2.5e-4


@dataclass
class SolverSettings:
    """
    Time-step and Newton controls.

    ``delta_F`` left as None is filled from the system's bending force
    scale (2.5e-4 * Y * I2 / L^2) when the simulator is built. It then
    scales with the width like every other force of the section.
    """

    h: float = 1e-3
    h_min: float = 1e-6
    h_max: float = 1e-2
    delta_F: Optional[float] = None
    delta_u: float = 1e-8
    delta_stable: float = 1e-6
    n_stable: int = 5
    max_newton_iters: int = 50
    shrink: float = 0.5
    grow: float = 1.5
    lambda_0: Optional[float] = None
    k_max: float = 1e12
    bc_method: str = 'eliminate'

    def validate(self):
        errors = []
        if not 0 < self.h_min <= self.h <= self.h_max:
            errors.append(f"need 0 < h_min <= h <= h_max, got {self.h_min}, {self.h}, {self.h_max}")
        if self.delta_F is not None and not self.delta_F > 0:
            errors.append("delta_F must be positive")
        if not (self.delta_u > 0 and self.delta_stable > 0):
            errors.append("displacement tolerances must be positive")
        if not self.shrink < 1.0 < self.grow:
            errors.append("need shrink < 1 < grow")
        if self.max_newton_iters < 1 or self.n_stable < 1:
            errors.append("iteration limits must be at least 1")
        if not self.k_max > 1.0:
            errors.append("k_max must exceed 1")
        if self.bc_method not in BC_METHODS:
            errors.append(f"bc_method must be one of {BC_METHODS}")
        if errors:
            raise ConfigurationError("Invalid solver settings: " + "; ".join(errors))
        return self


@dataclass
class MassMatrix:
    """Lumped (diagonal) mass: rho*A*dl per node coordinate, rho*(I1+I2)*e per twist angle"""

    diagonal: np.ndarray

    def __post_init__(self):
        self.diagonal = np.asarray(self.diagonal, dtype=float)
        if np.any(self.diagonal <= 0.0):
            raise ValueError("lumped mass entries must be strictly positive")

    def as_banded(self, half_bandwidth=10):
        return BandedSystem.diagonal_matrix(self.diagonal, half_bandwidth)

    def apply(self, x):
        return self.diagonal * x


def lumped_mass(rest, section, material):
    """
    Lumped mass matrix of a rod.

    Interior nodes carry their Voronoi length, the end nodes half of their
    single edge.
    """
    edge_lengths = rest.rest_edge_lengths
    node_lengths = np.empty(rest.n_nodes)
    node_lengths[1:-1] = rest.voronoi_lengths
    node_lengths[0] = 0.5 * edge_lengths[0]
    node_lengths[-1] = 0.5 * edge_lengths[-1]

    translational = material.density * section.area * node_lengths
    rotational = material.density * (section.inertia_1 + section.inertia_2) * edge_lengths
    diagonal = np.empty(4 * rest.n_nodes - 1)
    diagonal[0::4] = translational
    diagonal[1::4] = translational
    diagonal[2::4] = translational
    diagonal[3::4] = rotational
    return MassMatrix(diagonal)


@dataclass
class RibbonSystem:
    """Everything the residual needs that does not change during a run"""

    rest: object
    section: object
    material: object
    model: str = 'kirchhoff'
    options: ModelOptions = field(default_factory=ModelOptions)
    mass: MassMatrix = None

    def __post_init__(self):
        if self.mass is None:
            self.mass = lumped_mass(self.rest, self.section, self.material)

    @property
    def bending_scale(self):
        """Y * I2 / L^2"""
        length = float(np.sum(self.rest.rest_edge_lengths))
        return self.material.youngs_modulus * self.section.inertia_2 / length ** 2

    def assemble(self, state, frames, dense=False):
        return assemble(state, self.rest, frames, self.model, self.section, self.material,
                        self.options, dense=dense)

    def energy(self, state, frames):
        """Model energy plus the stretch of edge 0, as in ``assemble``"""
        strains = element_strains(state, self.rest, frames)
        law = evaluate_model(self.model, strains, self.rest.natural_strains, self.rest,
                             self.section, self.material, self.options)
        edge_energy, _, _ = _leading_edge_stretch(state, self.rest, self.section, self.material)
        return law.total_energy + edge_energy

    def strains(self, state, frames):
        return element_strains(state, self.rest, frames)


@dataclass
class LoadSchedule:
    """
    Prescribed DOF values and dead loads as functions of time.

    Attributes:
        fixed_dofs (np.ndarray): Indices held by the boundary conditions
        prescribed (Callable): t -> values of the fixed DOFs
        external_force (Callable): Optional t -> dead load vector
    """

    fixed_dofs: np.ndarray
    prescribed: Callable[[float], np.ndarray]
    external_force: Optional[Callable[[float], np.ndarray]] = None

    @classmethod
    def hold(cls, q, fixed_dofs, external_force=None):
        values = np.asarray(q, dtype=float)[np.asarray(fixed_dofs, dtype=int)].copy()
        return cls(np.asarray(fixed_dofs, dtype=int), lambda t: values, external_force)

    @classmethod
    def ramp(cls, q, fixed_dofs, increment, t_start, duration, external_force=None):
        """Fixed DOFs move linearly by ``increment`` over [t_start, t_start + duration]"""
        fixed_dofs = np.asarray(fixed_dofs, dtype=int)
        start = np.asarray(q, dtype=float)[fixed_dofs].copy()
        increment = np.asarray(increment, dtype=float)

        def prescribed(t):
            fraction = 1.0 if duration <= 0 else min(max((t - t_start) / duration, 0.0), 1.0)
            return start + fraction * increment

        return cls(fixed_dofs, prescribed, external_force)

    def boundary(self, t):
        return BoundaryConditions(self.fixed_dofs, self.prescribed(t))

    def force(self, t, n_dof):
        if self.external_force is None:
            return np.zeros(n_dof)
        return np.asarray(self.external_force(t), dtype=float)


@dataclass
class SimulationState:
    state: StateVector
    frames: object
    time: float = 0.0
    h: Optional[float] = None

    def copy(self):
        return SimulationState(self.state.copy(), self.frames.copy(), self.time, self.h)


@dataclass
class StepDiagnostics:
    """Per-step record streamed by the simulator"""

    t: float
    h: float
    iterations: int
    residual_norms: list
    regularization: float
    attempted_steps: list
    h_next: float
    energy: float = float('nan')

    @property
    def residual_norm(self):
        return self.residual_norms[-1] if self.residual_norms else float('nan')

    def to_dict(self):
        return {
            't': self.t,
            'h': self.h,
            'iterations': self.iterations,
            'residual_norm': self.residual_norm,
            'regularization': self.regularization,
            'attempts': len(self.attempted_steps),
        }


@dataclass
class LinearSolveResult:
    solution: np.ndarray
    method: str
    regularization: float = 0.0
    condition: float = float('inf')


def newton_step_residual(state_guess, state_prev, h, mass, F_int, F_ext):
    """
    Implicit Euler residual r = M dq - h M q_dot_prev - h^2 (F_int + F_ext).

    Args:
        state_guess (StateVector): Newton iterate at t + h
        state_prev (StateVector): Converged state at t (supplies q_dot)
        h (float): Step size (s)
        mass (MassMatrix): Lumped mass
        F_int (np.ndarray): Internal force at the iterate
        F_ext (np.ndarray): External force at t + h

    Returns:
        np.ndarray: Residual vector
    """
    dq = state_guess.q - state_prev.q
    return mass.apply(dq) - h * mass.apply(state_prev.q_dot) - h ** 2 * (F_int + F_ext)


def newton_jacobian(stiffness, mass, h, external_jacobian=None):
    """
    J = M + h^2 K - h^2 dF_ext/dq, with K the assembled stiffness (hess E).

    Returns:
        BandedSystem: Same band structure as ``stiffness``
    """
    jacobian = mass.as_banded(stiffness.half_bandwidth).combined(stiffness, h ** 2)
    if external_jacobian is not None:
        jacobian = jacobian.combined(external_jacobian, -h ** 2)
    return jacobian


def _factorize(system):
    hb = system.half_bandwidth
    lu, piv, info = dgbtrf(system.to_lapack(), hb, hb)
    return lu, piv, info


def _lu_solver(lu, piv, hb):
    def solve(rhs, trans=0):
        x, info = dgbtrs(lu, hb, hb, np.asarray(rhs, dtype=float).ravel(), piv, trans=trans)
        if info != 0:
            raise np.linalg.LinAlgError(f"dgbtrs returned info={info}")
        return x
    return solve


def condition_estimate(system, solve):
    """1-norm condition number from the LU factors (no explicit inverse)"""
    n = system.n_dof
    inverse = LinearOperator((n, n), matvec=solve, rmatvec=lambda x: solve(x, trans=1), dtype=float)
    return system.norm1() * onenormest(inverse)


def robust_solve(J, r, k_max=1e12, lambda_0=None, max_escalations=30):
    """
    Solve J x = r, escalating regularization when J is ill-conditioned.

    Direct banded LU when cond(J) < k_max; otherwise (J + lambda I) with
    lambda growing tenfold from lambda_0; otherwise the truncated-SVD
    pseudo-inverse. An exactly singular factorization skips straight to the
    pseudo-inverse.

    Args:
        J (BandedSystem): Square system
        r (np.ndarray): Right-hand side
        k_max (float): Condition-number bound
        lambda_0 (float): First regularization (default 1e-12 * ||J||_1)
        max_escalations (int): Number of tenfold increases tried

    Returns:
        LinearSolveResult: Solution and the path that produced it

    Raises:
        SolveFailed: If every path fails
    """
    r = np.asarray(r, dtype=float)
    hb = J.half_bandwidth
    norm = J.norm1()

    lu, piv, info = _factorize(J)
    if info == 0:
        solve = _lu_solver(lu, piv, hb)
        condition = condition_estimate(J, solve)
        if condition < k_max:
            return LinearSolveResult(solve(r), 'direct', 0.0, condition)

        regularization = lambda_0 if lambda_0 is not None else 1e-12 * norm
        for _ in range(max_escalations):
            shifted = J.copy().add_diagonal(regularization)
            lu, piv, info = _factorize(shifted)
            if info == 0:
                solve = _lu_solver(lu, piv, hb)
                condition = condition_estimate(shifted, solve)
                if condition < k_max:
                    logger.debug(f"Regularized solve with lambda={regularization:.3e} (cond {condition:.3e})")
                    return LinearSolveResult(solve(r), 'regularized', regularization, condition)
            regularization *= 10.0
        logger.warning(f"Regularization did not reach cond < {k_max:.1e}; using pseudo-inverse")
    else:
        logger.warning(f"Banded LU hit a zero pivot (info={info}); using pseudo-inverse")

    try:
        pseudo = np.linalg.pinv(J.to_dense(), rcond=1.0 / k_max)
        solution = pseudo @ r
    except np.linalg.LinAlgError as e:
        raise SolveFailed(f"pseudo-inverse failed: {e}") from e
    if not np.all(np.isfinite(solution)):
        raise SolveFailed("pseudo-inverse produced non-finite values")
    return LinearSolveResult(solution, 'pseudo_inverse', 0.0, float('inf'))


def _newton_solve(sim, system, schedule, settings, h):
    """
    Newton iterations for one implicit Euler step.

    Returns:
        tuple: (converged, q, iterations, residual norms, largest regularization,
            infinity norm of the last Newton correction)
    """
    prev = sim.state
    n_dof = prev.n_dof
    t_new = sim.time + h
    bc = schedule.boundary(t_new).check(n_dof)
    F_ext = schedule.force(t_new, n_dof)
    free = bc.free_dofs(n_dof)
    eliminate = settings.bc_method == 'eliminate'

    # constant-velocity predictor
    q = prev.q + h * prev.q_dot
    if eliminate:
        q = bc.impose(q)
    norms = []
    regularization = 0.0
    correction = 0.0

    for iteration in range(settings.max_newton_iters):
        guess = StateVector(q)
        frames = frames_for_state(guess, sim.frames)
        _, F_int, stiffness = system.assemble(guess, frames)
        residual = newton_step_residual(guess, prev, h, system.mass, F_int, F_ext)
        force_norm = float(np.linalg.norm(residual[free])) / h ** 2
        norms.append(force_norm)
        if force_norm < settings.delta_F:
            return True, q, iteration, norms, regularization, correction

        jacobian = newton_jacobian(stiffness, system.mass, h)
        if eliminate:
            result = robust_solve(jacobian.submatrix(free), -residual[free], settings.k_max, settings.lambda_0)
            step = np.zeros(n_dof)
            step[free] = result.solution
        else:
            penalized, rhs = apply_bc(jacobian, -residual, bc, q)
            result = robust_solve(penalized, rhs, settings.k_max, settings.lambda_0)
            step = result.solution
        regularization = max(regularization, result.regularization)
        q = q + step
        correction = float(np.max(np.abs(step[free])))

        if correction / h < settings.delta_u:
            return True, q, iteration + 1, norms, regularization, correction

    return False, q, settings.max_newton_iters, norms, regularization, correction


def advance(sim, system, schedule, settings, t_end=None):
    """
    One converged implicit Euler step with adaptive step size.

    Args:
        sim (SimulationState): Converged state at time t
        system (RibbonSystem): Rod data and energy model
        schedule (LoadSchedule): Boundary conditions and loads
        settings (SolverSettings): Tolerances and step controls
        t_end (float): Optional end of the current phase; the step is
            clipped so it lands on it

    Returns:
        tuple: (SimulationState at t + h, StepDiagnostics)

    Raises:
        StepFloorExceeded: If Newton fails at h = h_min
    """
    h = sim.h if sim.h is not None else settings.h
    h = min(max(h, settings.h_min), settings.h_max)
    attempts = []

    while True:
        h_step = h if t_end is None else min(h, t_end - sim.time)
        attempts.append(h_step)
        try:
            converged, q, iterations, norms, regularization, correction = _newton_solve(
                sim, system, schedule, settings, h_step)
        except (KinematicsError, ModelDomainError, SolveFailed) as e:
            logger.warning(f"Newton step at t={sim.time:.6g}, h={h_step:.3e} failed: {e}")
            converged, iterations, norms, regularization, correction = False, 0, [], 0.0, float('inf')

        if converged:
            break
        if h <= settings.h_min:
            logger.error(f"Step size floor reached at t={sim.time:.6g}")
            raise StepFloorExceeded(
                f"Newton did not converge at h_min={settings.h_min:.1e} (t={sim.time:.6g})",
                time=sim.time, attempted_steps=attempts, residual_norms=norms)
        h = max(h * settings.shrink, settings.h_min)
        logger.warning(f"Halving step to h={h:.3e} at t={sim.time:.6g}")

    new_state = StateVector(q, (q - sim.state.q) / h_step)
    frames = frames_for_state(new_state, sim.frames)

    # growth looks at the Newton correction, not the step displacement
    if correction < settings.delta_stable and iterations < settings.n_stable:
        h_next = min(h * settings.grow, settings.h_max)
    else:
        h_next = h

    energy = system.energy(new_state, frames)
    diagnostics = StepDiagnostics(sim.time + h_step, h_step, iterations, norms, regularization,
                                  attempts, h_next, energy)
    logger.debug(f"t={diagnostics.t:.6g} h={h_step:.3e} iters={iterations} "
                 f"|r|={diagnostics.residual_norm:.3e} lambda={regularization:.1e}")
    return SimulationState(new_state, frames, sim.time + h_step, h_next), diagnostics


@dataclass
class PhaseCounters:
    steps: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    simulated_time: float = 0.0
    rejected: int = 0


class RibbonSimulator:
    """
    Runs ``advance`` over load phases and keeps the diagnostics stream.

    The observer, when given, is called after every converged step with the
    new SimulationState and its StepDiagnostics.
    """

    def __init__(self, system, settings=None, observer=None):
        self.system = system
        self.settings = settings or SolverSettings()
        if self.settings.delta_F is None:
            self.settings.delta_F = FORCE_TOLERANCE * system.bending_scale
        self.settings.validate()
        self.observer = observer
        self.history = []
        self.phases = {}

    def run(self, sim, schedule, t_end, phase='default', observer=None):
        """
        Step from ``sim.time`` to ``t_end``.

        Returns:
            SimulationState: State at ``t_end``
        """
        counters = self.phases.setdefault(phase, PhaseCounters())
        observer = observer or self.observer
        start = time.perf_counter()
        t_start = sim.time
        logger.debug(f"Phase '{phase}' from t={sim.time:.4g} to t={t_end:.4g} ({self.system.model})")
        try:
            while t_end - sim.time > 1e-12 * max(1.0, abs(t_end)):
                sim, diagnostics = advance(sim, self.system, schedule, self.settings, t_end)
                self.history.append(diagnostics)
                counters.steps += 1
                counters.iterations += diagnostics.iterations
                counters.rejected += len(diagnostics.attempted_steps) - 1
                if observer is not None:
                    observer(sim, diagnostics)
        finally:
            counters.wall_time += time.perf_counter() - start
            counters.simulated_time += sim.time - t_start
        return sim

    @property
    def total_steps(self):
        return sum(c.steps for c in self.phases.values())

    @property
    def total_iterations(self):
        return sum(c.iterations for c in self.phases.values())

    @property
    def wall_time(self):
        return sum(c.wall_time for c in self.phases.values())

    def summary(self):
        return {
            name: {
                'steps': c.steps,
                'iterations': c.iterations,
                'wall_time': c.wall_time,
                'simulated_time': c.simulated_time,
                'rejected': c.rejected,
            }
            for name, c in self.phases.items()
        }
