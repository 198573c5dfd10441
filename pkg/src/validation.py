"""
Validation Module
Invariant suite behind the ``validate`` verb: derivative checks against
finite differences, frame invariance, banded vs dense assembly and the
transition detector on synthetic traces
"""

import time

import numpy as np
from scipy.spatial.transform import Rotation

from .assembly import assemble, total_energy
from .energy_models import MODEL_IDS, CrossSection, MaterialParams, evaluate_model
from .finite_difference import DEFAULT_RELATIVE_STEP, central_gradient, relative_error
from .kinematics import RestConfiguration, StateVector, initialize_frames, rest_configuration
from .logger import get_logger
from .scenarios import Trace, TraceRecord, detect_transitions
from .strain_derivatives import element_derivatives, local_strains, random_elements

logger = get_logger(__name__)

TOLERANCES = {
    'strain_jacobian': 1e-6,
    'strain_hessian': 1e-5,
    'model_gradient': 1e-7,
    'model_hessian': 1e-6,
    'frame_invariance': 1e-10,
    'banded_vs_dense': 1e-10,
    'transition_detector': 1e-12,
}

CHECK_SECTION = CrossSection(0.5, 0.1, 0.5)
CHECK_MATERIAL = MaterialParams(youngs_modulus=1.0, poisson_ratio=0.5)


def _record(name, max_error, tolerance=None):
    tolerance = TOLERANCES[name.split(':')[0]] if tolerance is None else tolerance
    passed = bool(np.isfinite(max_error) and max_error < tolerance)
    return {'name': name, 'passed': passed, 'max_error': float(max_error), 'tolerance': tolerance}


def _dof_steps(dofs, column):
    return DEFAULT_RELATIVE_STEP * np.maximum(1.0, np.abs(dofs[:, column]))


def _blockwise_error(actual, expected):
    axes = tuple(range(1, actual.ndim))
    scale = np.maximum(np.max(np.abs(expected), axis=axes), 1e-12)
    return float(np.max(np.max(np.abs(actual - expected), axis=axes) / scale))


def strain_jacobian_error(rng, count):
    """Worst per-element error of the 4x11 strain Jacobians against central differences"""
    geometry = random_elements(rng, count)
    analytic = element_derivatives(geometry, with_hessian=False).jacobian
    numeric = np.empty_like(analytic)
    for a in range(analytic.shape[2]):
        step = _dof_steps(geometry.dofs, a)
        plus = geometry.dofs.copy()
        minus = geometry.dofs.copy()
        plus[:, a] += step
        minus[:, a] -= step
        numeric[:, :, a] = (local_strains(geometry, plus) - local_strains(geometry, minus)) / (2.0 * step[:, None])
    return _blockwise_error(analytic, numeric)


def strain_hessian_error(rng, count):
    """
    Worst per-element error of the strain Hessians.

    Differencing the Jacobian along transported frames adds an antisymmetric
    part, so the reference is the symmetrized difference quotient.
    """
    geometry = random_elements(rng, count)
    analytic = element_derivatives(geometry).hessian
    numeric = np.empty_like(analytic)
    for a in range(analytic.shape[3]):
        step = _dof_steps(geometry.dofs, a)
        plus = geometry.dofs.copy()
        minus = geometry.dofs.copy()
        plus[:, a] += step
        minus[:, a] -= step
        j_plus = element_derivatives(geometry.perturbed(plus), with_hessian=False).jacobian
        j_minus = element_derivatives(geometry.perturbed(minus), with_hessian=False).jacobian
        numeric[:, :, :, a] = (j_plus - j_minus) / (2.0 * step[:, None, None])
    numeric = 0.5 * (numeric + np.swapaxes(numeric, 2, 3))
    return _blockwise_error(analytic, numeric)


def random_strain_state(rng, count):
    """
    Strains every model accepts: kappa2 of one sign with |kappa2| >= 0.5 and
    |tau| <= 0.1, which keeps |W eta'| well below 2 for the check section.
    """
    rest = RestConfiguration(rng.uniform(0.8, 1.2, size=count + 1))
    kappa2 = rng.choice([-1.0, 1.0]) * rng.uniform(0.5, 1.0, size=count)
    strains = np.column_stack([
        rng.uniform(-0.05, 0.05, size=count),
        rng.uniform(-0.1, 0.1, size=count),
        kappa2,
        rng.uniform(-0.1, 0.1, size=count),
    ])
    return strains, rest


def model_derivative_errors(model, rng, count, section=CHECK_SECTION, material=CHECK_MATERIAL):
    """
    Gradient and own-block Hessian errors of one energy model.

    Returns:
        tuple: (gradient error, Hessian error)
    """
    strains, rest = random_strain_state(rng, count)
    natural = np.zeros((count, 3))
    law = evaluate_model(model, strains, natural, rest, section, material)

    def energy(flat):
        return evaluate_model(model, flat.reshape(count, 4), natural, rest, section, material).total_energy

    numeric_grad = central_gradient(energy, strains.ravel()).reshape(count, 4)
    grad_error = relative_error(law.effective_grad(), numeric_grad)

    # perturb every third element at once so no neighbor moves with it
    numeric_hess = np.empty((count, 4, 4))
    steps = DEFAULT_RELATIVE_STEP * np.maximum(1.0, np.abs(strains))
    for offset in range(3):
        rows = np.arange(offset, count, 3)
        for c in range(4):
            plus = strains.copy()
            minus = strains.copy()
            plus[rows, c] += steps[rows, c]
            minus[rows, c] -= steps[rows, c]
            g_plus = evaluate_model(model, plus, natural, rest, section, material).grad
            g_minus = evaluate_model(model, minus, natural, rest, section, material).grad
            numeric_hess[rows, :, c] = (g_plus[rows] - g_minus[rows]) / (2.0 * steps[rows, c, None])
    return grad_error, _blockwise_error(law.hess, numeric_hess)


def arched_rod(rng, n_nodes, length=1.0, bend=1.2, noise=1e-2):
    """
    Planar arc in the x-z plane with small out-of-plane noise and twist.

    kappa2 keeps one sign along the rod, which every model accepts.

    Returns:
        tuple: (StateVector, RestConfiguration, FrameSet)
    """
    s = np.linspace(0.0, 1.0, n_nodes)
    angle = bend * (s - 0.5)
    radius = length / bend
    positions = np.column_stack([radius * np.sin(angle), np.zeros(n_nodes), radius * np.cos(angle)])
    positions += noise * length / n_nodes * rng.normal(size=positions.shape)
    thetas = rng.uniform(-0.05, 0.05, size=n_nodes - 1)
    rest = rest_configuration(positions * rng.uniform(0.98, 1.02))
    frames = initialize_frames(positions, thetas, d1_hint=(0.0, 1.0, 0.0))
    return StateVector.from_positions(positions, thetas), rest, frames


def frame_invariance_error(model, rng, n_nodes=30, motions=20):
    """Largest relative energy change under random rigid motions"""
    state, rest, frames = arched_rod(rng, n_nodes)
    args = (model, CHECK_SECTION, CHECK_MATERIAL)
    base = total_energy(state.q, rest, frames, *args)
    worst = 0.0
    for rotation in Rotation.random(motions, random_state=rng).as_matrix():
        shift = rng.normal(size=3)
        moved = StateVector.from_positions(state.positions @ rotation.T + shift, state.thetas)
        energy = total_energy(moved.q, rest, frames.rotated(rotation), *args)
        worst = max(worst, abs(energy - base) / max(abs(base), 1e-300))
    return worst


def banded_dense_error(model, rng, n_nodes):
    state, rest, frames = arched_rod(rng, n_nodes)
    args = (model, CHECK_SECTION, CHECK_MATERIAL)
    _, _, banded = assemble(state, rest, frames, *args)
    _, _, dense = assemble(state, rest, frames, *args, dense=True)
    return relative_error(banded.to_dense(), dense)


def transition_detector_error():
    """Deviation of the detector on the synthetic unimodal and monotone traces"""
    x = np.linspace(0.0, 0.4, 81)
    parabola = Trace('shear', [TraceRecord(v, 0.0, 0.0, -(v - 0.2) ** 2 + 1.0, 0.0, i) for i, v in enumerate(x)])
    rising = Trace('shear', [TraceRecord(v, 0.0, 0.0, v, 0.0, i) for i, v in enumerate(x)])
    peak = detect_transitions(parabola)
    flat = detect_transitions(rising)
    if peak.first is None or peak.second is not None or flat.first is not None or flat.second is not None:
        return float('inf')
    return abs(peak.first - 0.2)


def run_invariant_suite(seed=0, samples=200):
    """
    Run every invariant check.

    Args:
        seed (int): Seed of the random instances
        samples (int): Random elements per strain check and per model check

    Returns:
        list: One dict per check with 'name', 'passed', 'max_error', 'tolerance'
    """
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    records = [
        _record('strain_jacobian', strain_jacobian_error(rng, samples)),
        _record('strain_hessian', strain_hessian_error(rng, samples)),
    ]
    for model in MODEL_IDS:
        grad_error, hess_error = model_derivative_errors(model, rng, samples)
        records.append(_record(f'model_gradient:{model}', grad_error))
        records.append(_record(f'model_hessian:{model}', hess_error))
        records.append(_record(f'frame_invariance:{model}', frame_invariance_error(model, rng)))
        for n_nodes in (5, 8):
            records.append(_record(f'banded_vs_dense:{model}:M{n_nodes}', banded_dense_error(model, rng, n_nodes)))
    records.append(_record('transition_detector', transition_detector_error()))

    failed = [r['name'] for r in records if not r['passed']]
    logger.info(f"Invariant suite: {len(records) - len(failed)}/{len(records)} passed "
                f"in {time.perf_counter() - start:.1f}s")
    for name in failed:
        logger.warning(f"Check failed: {name}")
    return records
