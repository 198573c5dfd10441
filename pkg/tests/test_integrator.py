"""Tests for the implicit Euler stepper and the regularized linear solve"""

import numpy as np
import pytest

from src import integrator
from src.assembly import BandedSystem
from src.energy_models import CrossSection, MaterialParams
from src.errors import ConfigurationError, StepFloorExceeded
from src.integrator import (
    FORCE_TOLERANCE,
    LoadSchedule,
    MassMatrix,
    RibbonSimulator,
    RibbonSystem,
    SimulationState,
    SolverSettings,
    advance,
    condition_estimate,
    lumped_mass,
    newton_jacobian,
    newton_step_residual,
    robust_solve,
)
from src.kinematics import StateVector, node_dofs, theta_dof

SECTION = CrossSection(0.5, 0.1, 0.5)
MATERIAL = MaterialParams(youngs_modulus=1.0, poisson_ratio=0.5, density=1.0)
N_NODES = 7


def clamped_end():
    return np.concatenate([node_dofs(0), node_dofs(1), [theta_dof(0)]])


def tip_load(n_dof, magnitude=1e-4):
    load = np.zeros(n_dof)
    load[n_dof - 1] = magnitude
    return lambda t: load


def spd_banded(rng, n):
    root = rng.normal(size=(n, n))
    root[np.abs(np.subtract.outer(np.arange(n), np.arange(n))) > 5] = 0.0
    return root @ root.T + n * np.eye(n)


class TestSolverSettings:

    def test_defaults_are_valid(self):
        settings = SolverSettings()
        assert settings.validate() is settings

    @pytest.mark.parametrize('kwargs', [
        {'h': 1.0},
        {'h_min': 0.0},
        {'delta_F': -1.0},
        {'shrink': 1.5},
        {'max_newton_iters': 0},
        {'k_max': 0.5},
        {'bc_method': 'lagrange'},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            SolverSettings(**kwargs).validate()


class TestMass:

    def test_lumped_mass_totals(self, straight):
        _, rest, _ = straight(N_NODES, length=2.0)
        mass = lumped_mass(rest, SECTION, MATERIAL)
        assert mass.diagonal.size == 4 * N_NODES - 1
        assert np.sum(mass.diagonal[0::4]) == pytest.approx(MATERIAL.density * SECTION.area * 2.0)
        np.testing.assert_allclose(mass.diagonal[3::4],
                                   MATERIAL.density * (SECTION.inertia_1 + SECTION.inertia_2) * 2.0 / (N_NODES - 1))

    def test_mass_must_be_positive(self):
        with pytest.raises(ValueError):
            MassMatrix([1.0, 0.0, 1.0])


class TestRibbonSystem:

    def test_energy_matches_assembly(self, straight):
        _, rest, _ = straight(N_NODES)
        stretched, _, frames = straight(N_NODES, length=1.1)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        energy, _, _ = system.assemble(stretched, frames)
        assert energy > 0.0
        assert system.energy(stretched, frames) == pytest.approx(energy, rel=1e-12)

    def test_bending_scale_is_proportional_to_width(self, straight):
        _, rest, _ = straight(N_NODES)
        narrow = RibbonSystem(rest, CrossSection(0.5, 0.1, 0.5, inplane_ratio=25.0), MATERIAL)
        wide = RibbonSystem(rest, CrossSection(1.0, 0.1, 0.5, inplane_ratio=25.0), MATERIAL)
        assert wide.bending_scale == pytest.approx(2.0 * narrow.bending_scale)
        np.testing.assert_allclose(wide.mass.diagonal, 2.0 * narrow.mass.diagonal)


class TestResidual:

    def test_free_flight_has_zero_residual(self, rng):
        n = 11
        mass = MassMatrix(rng.uniform(1.0, 2.0, size=n))
        q_dot = rng.normal(size=n)
        prev = StateVector(rng.normal(size=n), q_dot)
        h = 1e-2
        guess = StateVector(prev.q + h * q_dot)
        residual = newton_step_residual(guess, prev, h, mass, np.zeros(n), np.zeros(n))
        np.testing.assert_allclose(residual, 0.0, atol=1e-15)

    def test_forces_enter_with_h_squared(self):
        n = 11
        mass = MassMatrix(np.ones(n))
        prev = StateVector(np.zeros(n))
        residual = newton_step_residual(prev, prev, 0.1, mass, np.ones(n), np.ones(n))
        np.testing.assert_allclose(residual, -0.02)

    def test_jacobian(self, rng):
        stiffness = BandedSystem.from_dense(spd_banded(rng, 15))
        mass = MassMatrix(np.full(15, 2.0))
        jacobian = newton_jacobian(stiffness, mass, 0.1)
        np.testing.assert_allclose(jacobian.to_dense(), 2.0 * np.eye(15) + 0.01 * stiffness.to_dense())


class TestRobustSolve:

    def test_direct(self, rng):
        dense = spd_banded(rng, 20)
        r = rng.normal(size=20)
        result = robust_solve(BandedSystem.from_dense(dense), r)
        assert result.method == 'direct'
        assert result.regularization == 0.0
        np.testing.assert_allclose(result.solution, np.linalg.solve(dense, r), rtol=1e-10)

    def test_condition_estimate_bounds(self, rng):
        dense = spd_banded(rng, 12)
        exact = np.linalg.cond(dense, 1)
        system = BandedSystem.from_dense(dense)
        inverse = np.linalg.inv(dense)
        estimate = condition_estimate(system, lambda x, trans=0: (inverse.T if trans else inverse) @ x)
        assert exact / 10.0 <= estimate <= exact * (1.0 + 1e-10)

    def test_regularized(self):
        diagonal = np.ones(12)
        diagonal[5] = 1e-15
        result = robust_solve(BandedSystem.diagonal_matrix(diagonal), np.ones(12), k_max=1e10)
        assert result.method == 'regularized'
        assert result.regularization > 0.0
        assert result.condition < 1e10
        assert np.all(np.isfinite(result.solution))

    def test_two_by_two_takes_smallest_admissible_lambda(self):
        diagonal = np.array([1.0, 1e-16])
        r = np.array([1.0, 1.0])
        result = robust_solve(BandedSystem.diagonal_matrix(diagonal, 1), r, k_max=1e12, lambda_0=1e-14)

        expected = 1e-14
        while np.linalg.cond(np.diag(diagonal + expected), 1) >= 1e12:
            expected *= 10.0
        assert result.method == 'regularized'
        assert result.regularization == pytest.approx(expected)
        assert result.regularization > 1e-14
        assert np.linalg.cond(np.diag(diagonal + result.regularization / 10.0), 1) >= 1e12
        np.testing.assert_allclose(result.solution, r / (diagonal + expected))

    def test_rank_one_gives_minimum_norm_solution(self):
        dense = np.array([[1.0, 1.0], [1.0, 1.0]])
        r = np.array([1.0, 3.0])
        result = robust_solve(BandedSystem.from_dense(dense, 1), r)
        assert result.method == 'pseudo_inverse'
        expected, *_ = np.linalg.lstsq(dense, r, rcond=None)
        np.testing.assert_allclose(result.solution, expected)
        np.testing.assert_allclose(result.solution, [1.0, 1.0])

    def test_zero_pivot_uses_pseudo_inverse(self):
        diagonal = np.ones(12)
        diagonal[3] = 0.0
        r = np.arange(12, dtype=float)
        result = robust_solve(BandedSystem.diagonal_matrix(diagonal), r)
        assert result.method == 'pseudo_inverse'
        assert result.solution[3] == pytest.approx(0.0, abs=1e-14)
        np.testing.assert_allclose(np.delete(result.solution, 3), np.delete(r, 3))


class TestAdvance:

    def test_equilibrium_takes_no_iterations(self, straight):
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        settings = SolverSettings(h=1e-3, delta_F=1e-9)
        schedule = LoadSchedule.hold(state.q, clamped_end())
        sim, diagnostics = advance(SimulationState(state, frames), system, schedule, settings)
        assert diagnostics.iterations == 0
        assert diagnostics.h_next == pytest.approx(1.5e-3)
        assert sim.time == pytest.approx(1e-3)
        np.testing.assert_array_equal(sim.state.q, state.q)

    def test_step_floor(self, straight):
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        settings = SolverSettings(h=1e-6, h_min=1e-6, h_max=1e-6, delta_F=1e-30, delta_u=1e-30,
                                  max_newton_iters=1)
        schedule = LoadSchedule.hold(state.q, clamped_end(), tip_load(state.n_dof, 1.0))
        with pytest.raises(StepFloorExceeded) as info:
            advance(SimulationState(state, frames), system, schedule, settings)
        assert info.value.details['attempted_steps'] == [1e-6]

    def test_halving_floors_at_h_min(self, straight):
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        settings = SolverSettings(h=3e-6, h_min=1e-6, h_max=3e-6, delta_F=1e-30, delta_u=1e-30,
                                  max_newton_iters=1)
        schedule = LoadSchedule.hold(state.q, clamped_end(), tip_load(state.n_dof, 1.0))
        with pytest.raises(StepFloorExceeded) as info:
            advance(SimulationState(state, frames), system, schedule, settings)
        assert info.value.details['attempted_steps'] == pytest.approx([3e-6, 1.5e-6, 1e-6])

    @staticmethod
    def scripted_newton(monkeypatch, largest_h=np.inf, iterations=2, correction=0.0):
        """Newton that converges only for h <= largest_h, with a fixed outcome"""
        def fake(sim, system, schedule, settings, h):
            if h > largest_h:
                return False, sim.state.q.copy(), settings.max_newton_iters, [1.0], 0.0, 1.0
            return True, sim.state.q.copy(), iterations, [0.0], 0.0, correction
        monkeypatch.setattr(integrator, '_newton_solve', fake)

    def test_halves_until_newton_converges(self, straight, monkeypatch):
        self.scripted_newton(monkeypatch, largest_h=2.5e-3)
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, clamped_end())
        settings = SolverSettings(h=1e-2, h_max=1e-2, delta_F=1e-9)
        sim, diagnostics = advance(SimulationState(state, frames), system, schedule, settings)
        assert diagnostics.attempted_steps == pytest.approx([1e-2, 5e-3, 2.5e-3])
        assert diagnostics.h == pytest.approx(2.5e-3)
        assert sim.time == pytest.approx(2.5e-3)
        assert diagnostics.h_next == pytest.approx(3.75e-3)

    def test_growth_is_capped_at_h_max(self, straight, monkeypatch):
        self.scripted_newton(monkeypatch)
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, clamped_end())
        settings = SolverSettings(h=8e-3, h_max=1e-2, delta_F=1e-9)
        sim, diagnostics = advance(SimulationState(state, frames), system, schedule, settings)
        assert diagnostics.h_next == pytest.approx(1e-2)
        _, diagnostics = advance(sim, system, schedule, settings)
        assert diagnostics.h == diagnostics.h_next == pytest.approx(1e-2)

    @pytest.mark.parametrize('iterations, correction', [(2, 1e-5), (5, 0.0)])
    def test_no_growth_outside_the_stable_regime(self, straight, monkeypatch, iterations, correction):
        self.scripted_newton(monkeypatch, iterations=iterations, correction=correction)
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, clamped_end())
        settings = SolverSettings(h=2e-3, delta_F=1e-9, delta_stable=1e-6, n_stable=5)
        _, diagnostics = advance(SimulationState(state, frames), system, schedule, settings)
        assert diagnostics.h_next == pytest.approx(2e-3)

    def test_large_step_displacement_does_not_block_growth(self, straight, monkeypatch):
        state, rest, frames = straight(N_NODES)
        moved = state.q.copy()
        moved[node_dofs(N_NODES - 1)[1]] += 1e-3

        def fake(sim, system, schedule, settings, h):
            return True, moved.copy(), 2, [0.0], 0.0, 1e-9
        monkeypatch.setattr(integrator, '_newton_solve', fake)

        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, clamped_end())
        settings = SolverSettings(h=1e-3, delta_F=1e-9, delta_stable=1e-6)
        sim, diagnostics = advance(SimulationState(state, frames), system, schedule, settings)
        assert np.max(np.abs(sim.state.q - state.q)) > settings.delta_stable
        assert diagnostics.h_next == pytest.approx(1.5e-3)

    def test_predictor_carries_rigid_motion(self, straight):
        state, rest, frames = straight(N_NODES)
        velocity = np.zeros(state.n_dof)
        for node in range(N_NODES):
            velocity[node_dofs(node)] = [0.1, -0.2, 0.3]
        moving = StateVector(state.q, velocity)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, np.array([], dtype=int))
        settings = SolverSettings(h=1e-3, delta_F=1e-9)
        sim, diagnostics = advance(SimulationState(moving, frames), system, schedule, settings)
        assert diagnostics.iterations == 0
        np.testing.assert_allclose(sim.state.q, state.q + 1e-3 * velocity, atol=1e-15)
        np.testing.assert_allclose(sim.state.q_dot, velocity, atol=1e-10)

    def test_newton_converges_quadratically(self, straight):
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, clamped_end(), tip_load(state.n_dof))
        settings = SolverSettings(h=1.0, h_max=1.0, delta_F=1e-12, delta_u=1e-30)
        _, diagnostics = advance(SimulationState(state, frames), system, schedule, settings)

        norms = np.array(diagnostics.residual_norms)
        assert len(norms) >= 2
        assert norms[-1] < settings.delta_F
        tail = norms[norms > 1e-9 * norms[0]][-3:]
        ratios = tail[1:] / tail[:-1] ** 2
        assert np.all(np.isfinite(ratios))
        assert np.all(tail[1:] <= 10.0 * tail[:-1] ** 2 / norms[0])

    def test_eliminate_and_penalty_agree(self, straight):
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        schedule = LoadSchedule.hold(state.q, clamped_end(), tip_load(state.n_dof))
        results = []
        for method in ('eliminate', 'penalty'):
            settings = SolverSettings(h=1e-2, delta_F=1e-10, delta_u=1e-12, bc_method=method)
            sim, _ = advance(SimulationState(state.copy(), frames.copy()), system, schedule, settings)
            results.append(sim.state.q)
        np.testing.assert_allclose(results[0], results[1], atol=1e-8)
        np.testing.assert_allclose(results[0][clamped_end()], state.q[clamped_end()])

    def test_ramp_reaches_target(self, straight):
        state, rest, frames = straight(N_NODES)
        fixed = np.concatenate([clamped_end(), node_dofs(N_NODES - 1)])
        increment = np.zeros(fixed.size)
        increment[-3] = -0.01
        schedule = LoadSchedule.ramp(state.q, fixed, increment, 0.0, 0.05)
        assert schedule.prescribed(0.1)[-3] == pytest.approx(state.q[fixed][-3] - 0.01)
        assert schedule.prescribed(-1.0)[-3] == pytest.approx(state.q[fixed][-3])


class TestSimulator:

    def test_run_fills_force_tolerance_and_counts_steps(self, straight):
        state, rest, frames = straight(N_NODES)
        system = RibbonSystem(rest, SECTION, MATERIAL)
        seen = []
        simulator = RibbonSimulator(system, SolverSettings(h=1e-2, h_max=2e-2),
                                    observer=lambda sim, diagnostics: seen.append(diagnostics.t))
        assert simulator.settings.delta_F == pytest.approx(FORCE_TOLERANCE * system.bending_scale)

        schedule = LoadSchedule.hold(state.q, clamped_end(), tip_load(state.n_dof))
        sim = simulator.run(SimulationState(state, frames), schedule, 0.1, phase='load')
        assert sim.time == pytest.approx(0.1)
        assert simulator.total_steps == len(simulator.history) == len(seen)
        assert sim.state.q[-1] > state.q[-1]
        summary = simulator.summary()
        assert summary['load']['steps'] == simulator.total_steps
        assert summary['load']['simulated_time'] == pytest.approx(0.1)
