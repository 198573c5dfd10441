"""Tests for global force and stiffness assembly"""

import numpy as np
import pytest

from src.assembly import (
    HALF_BANDWIDTH,
    BandedSystem,
    BoundaryConditions,
    apply_bc,
    assemble,
    element_stencils,
    total_energy,
)
from src.energy_models import MODEL_IDS
from src.errors import ConfigurationError
from src.finite_difference import central_gradient, central_jacobian, relative_error
from src.kinematics import StateVector, frames_for_state, node_dofs
from src.validation import CHECK_MATERIAL, CHECK_SECTION, TOLERANCES, arched_rod, banded_dense_error

N_NODES = 8


def random_banded(rng, n, half_bandwidth=HALF_BANDWIDTH):
    dense = rng.normal(size=(n, n))
    offsets = np.subtract.outer(np.arange(n), np.arange(n))
    dense[np.abs(offsets) > half_bandwidth] = 0.0
    return dense


def force_at(q, rest, frames, model):
    state = StateVector(q)
    moved = frames_for_state(state, frames)
    return assemble(state, rest, moved, model, CHECK_SECTION, CHECK_MATERIAL)[1]


class TestStencils:

    def test_first_element(self):
        np.testing.assert_array_equal(element_stencils(1)[0], [0, 1, 2, 4, 5, 6, 8, 9, 10, 3, 7])

    def test_stencils_fit_in_band(self):
        stencil = element_stencils(12)
        assert stencil.shape == (12, 11)
        assert np.max(stencil.max(axis=1) - stencil.min(axis=1)) == HALF_BANDWIDTH
        assert stencil.max() == 4 * 13 + 2


class TestBandedSystem:

    def test_dense_conversion(self, rng):
        dense = random_banded(rng, 30)
        np.testing.assert_array_equal(BandedSystem.from_dense(dense).to_dense(), dense)

    def test_rejects_wrong_storage_shape(self):
        with pytest.raises(ValueError):
            BandedSystem(5, np.zeros((3, 5)))

    def test_matvec(self, rng):
        dense = random_banded(rng, 25)
        x = rng.normal(size=25)
        np.testing.assert_allclose(BandedSystem.from_dense(dense).matvec(x), dense @ x, atol=1e-12)

    def test_norm1(self, rng):
        dense = random_banded(rng, 25)
        assert BandedSystem.from_dense(dense).norm1() == pytest.approx(np.linalg.norm(dense, 1))

    def test_submatrix(self, rng):
        dense = random_banded(rng, 30)
        keep = np.setdiff1d(np.arange(30), [0, 1, 2, 7, 17])
        sub = BandedSystem.from_dense(dense).submatrix(keep)
        np.testing.assert_array_equal(sub.to_dense(), dense[np.ix_(keep, keep)])

    def test_combined_and_diagonal(self, rng):
        a = random_banded(rng, 12)
        b = random_banded(rng, 12)
        total = BandedSystem.from_dense(a).combined(BandedSystem.from_dense(b), scale=0.5)
        np.testing.assert_allclose(total.to_dense(), a + 0.5 * b)
        np.testing.assert_allclose(total.diagonal(), np.diag(a + 0.5 * b))
        identity = BandedSystem.identity(12).add_diagonal(np.ones(12))
        np.testing.assert_array_equal(identity.to_dense(), 2.0 * np.eye(12))


class TestBoundaryConditions:

    def test_sorted_on_construction(self):
        bc = BoundaryConditions([7, 2], [1.0, 2.0])
        np.testing.assert_array_equal(bc.fixed_dofs, [2, 7])
        np.testing.assert_array_equal(bc.prescribed, [2.0, 1.0])

    @pytest.mark.parametrize('fixed, prescribed', [([1, 1], [0.0, 0.0]), ([1, 2], [0.0])])
    def test_invalid(self, fixed, prescribed):
        with pytest.raises(ConfigurationError):
            BoundaryConditions(fixed, prescribed)

    def test_clamped_and_impose(self):
        q = np.arange(11, dtype=float)
        bc = BoundaryConditions.clamped(q, [0, 3])
        np.testing.assert_array_equal(bc.prescribed, [0.0, 3.0])
        np.testing.assert_array_equal(bc.free_dofs(11), [1, 2, 4, 5, 6, 7, 8, 9, 10])
        moved = bc.impose(np.zeros(11))
        assert moved[3] == 3.0

    def test_index_out_of_range(self):
        with pytest.raises(ConfigurationError):
            BoundaryConditions([11], [0.0]).check(11)


class TestPenalty:

    def test_solution_hits_prescribed_values(self, rng):
        n = 19
        root = random_banded(rng, n, half_bandwidth=5)
        system = BandedSystem.from_dense(root @ root.T + n * np.eye(n))
        F = rng.normal(size=n)
        q = rng.normal(size=n)
        bc = BoundaryConditions([0, 1, 2, 18], [0.5, -0.5, 0.0, 2.0])
        band_before = system.band.copy()
        F_before = F.copy()

        penalized, rhs = apply_bc(system, F, bc, q)
        dq = np.linalg.solve(penalized.to_dense(), rhs)
        np.testing.assert_allclose((q + dq)[bc.fixed_dofs], bc.prescribed, atol=1e-8)
        np.testing.assert_array_equal(system.band, band_before)
        np.testing.assert_array_equal(F, F_before)

    def test_no_fixed_dofs(self):
        system = BandedSystem.identity(5)
        penalized, rhs = apply_bc(system, np.ones(5), BoundaryConditions(), np.zeros(5))
        np.testing.assert_array_equal(penalized.to_dense(), np.eye(5))
        np.testing.assert_array_equal(rhs, np.ones(5))


class TestAssembly:

    def test_straight_rod_at_rest(self, straight, unit_section, unit_material):
        state, rest, frames = straight(6)
        energy, F, K = assemble(state, rest, frames, 'kirchhoff', unit_section, unit_material)
        assert energy == pytest.approx(0.0, abs=1e-20)
        np.testing.assert_allclose(F, 0.0, atol=1e-14)
        assert K.n_dof == state.n_dof

    @pytest.mark.parametrize('model', MODEL_IDS)
    def test_force_is_negative_energy_gradient(self, model, rng):
        state, rest, frames = arched_rod(rng, N_NODES)
        energy, F, _ = assemble(state, rest, frames, model, CHECK_SECTION, CHECK_MATERIAL)
        args = (rest, frames, model, CHECK_SECTION, CHECK_MATERIAL)
        assert energy == pytest.approx(total_energy(state.q, *args), rel=1e-12)
        numeric = -central_gradient(lambda q: total_energy(q, *args), state.q)
        assert relative_error(F, numeric) < 1e-6

    @pytest.mark.parametrize('model', ['kirchhoff', 'sadowsky', 'sano', 'audoly'])
    def test_stiffness_is_symmetrized_force_jacobian(self, model, rng):
        state, rest, frames = arched_rod(rng, N_NODES)
        _, _, K = assemble(state, rest, frames, model, CHECK_SECTION, CHECK_MATERIAL, dense=True)
        numeric = -central_jacobian(lambda q: force_at(q, rest, frames, model), state.q)
        numeric = 0.5 * (numeric + numeric.T)
        assert relative_error(K, numeric) < 1e-5

    @pytest.mark.parametrize('model', MODEL_IDS)
    def test_banded_matches_dense(self, model, rng):
        assert banded_dense_error(model, rng, 12) < TOLERANCES['banded_vs_dense']

    def test_stiffness_is_symmetric(self, rng):
        state, rest, frames = arched_rod(rng, 12)
        _, _, K = assemble(state, rest, frames, 'audoly', CHECK_SECTION, CHECK_MATERIAL)
        assert K.asymmetry() < 1e-12

    def test_internal_forces_balance(self, rng):
        state, rest, frames = arched_rod(rng, 12)
        _, F, _ = assemble(state, rest, frames, 'sano', CHECK_SECTION, CHECK_MATERIAL)
        total = sum(F[node_dofs(i)] for i in range(state.n_nodes))
        np.testing.assert_allclose(total, 0.0, atol=1e-10 * np.max(np.abs(F)))
