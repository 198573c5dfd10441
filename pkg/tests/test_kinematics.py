"""Tests for the discrete centerline, frames and element strains"""

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from src.errors import AntiparallelEdges, AntiparallelTangents, DegenerateEdge
from src.kinematics import (
    ElementStrain,
    RestConfiguration,
    StateVector,
    curvature_binormal,
    dof_count,
    element_strains,
    frames_for_state,
    node_dofs,
    pack_dofs,
    parallel_transport,
    rest_configuration,
    signed_angle,
    theta_dof,
    unpack_dofs,
    update_frames,
)

N_NODES = 9
BEND = 1.2


class TestDofLayout:

    def test_counts_and_indices(self):
        assert dof_count(45) == 179
        np.testing.assert_array_equal(node_dofs(2), [8, 9, 10])
        assert theta_dof(1) == 7

    def test_pack_interleaves_positions_and_angles(self):
        positions = np.arange(9, dtype=float).reshape(3, 3)
        q = pack_dofs(positions, [10.0, 11.0])
        np.testing.assert_array_equal(q, [0, 1, 2, 10, 3, 4, 5, 11, 6, 7, 8])
        back_positions, back_thetas = unpack_dofs(q)
        np.testing.assert_array_equal(back_positions, positions)
        np.testing.assert_array_equal(back_thetas, [10.0, 11.0])

    def test_state_rejects_bad_dimension(self):
        with pytest.raises(ValueError):
            StateVector(np.zeros(12))

    def test_state_rejects_non_finite(self):
        q = np.zeros(11)
        q[4] = np.nan
        with pytest.raises(ValueError):
            StateVector(q)

    def test_state_defaults_to_rest_velocity(self):
        state = StateVector(np.zeros(11))
        np.testing.assert_array_equal(state.q_dot, np.zeros(11))
        assert state.n_nodes == 3


class TestRestConfiguration:

    def test_voronoi_lengths(self):
        rest = RestConfiguration([1.0, 2.0, 4.0])
        np.testing.assert_allclose(rest.voronoi_lengths, [1.5, 3.0])
        np.testing.assert_allclose(rest.element_edge_lengths, [2.0, 4.0])
        assert rest.n_nodes == 4
        assert rest.n_elements == 2
        assert rest.natural_strains.shape == (2, 3)

    def test_zero_rest_length_rejected(self):
        with pytest.raises(ValueError):
            RestConfiguration([1.0, 0.0, 1.0])


class TestGeometryPrimitives:

    def test_parallel_transport_maps_tangent_and_keeps_norm(self, rng):
        a = rng.normal(size=(20, 3))
        b = rng.normal(size=(20, 3))
        a /= np.linalg.norm(a, axis=1)[:, None]
        b /= np.linalg.norm(b, axis=1)[:, None]
        v = rng.normal(size=(20, 3))
        np.testing.assert_allclose(parallel_transport(a, a, b), b, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(parallel_transport(v, a, b), axis=1),
                                   np.linalg.norm(v, axis=1), rtol=1e-12)

    def test_parallel_transport_antiparallel(self):
        t = np.array([[1.0, 0.0, 0.0]])
        with pytest.raises(AntiparallelTangents):
            parallel_transport(np.array([[0.0, 1.0, 0.0]]), t, -t)

    def test_signed_angle(self):
        x = np.array([[1.0, 0.0, 0.0]])
        y = np.array([[0.0, 1.0, 0.0]])
        z = np.array([[0.0, 0.0, 1.0]])
        np.testing.assert_allclose(signed_angle(x, y, z), [np.pi / 2])
        np.testing.assert_allclose(signed_angle(y, x, z), [-np.pi / 2])

    def test_curvature_binormal_magnitude(self):
        phi = 0.3
        e = np.array([[1.0, 0.0, 0.0]])
        f = np.array([[np.cos(phi), np.sin(phi), 0.0]]) * 2.0
        kb = curvature_binormal(e, f)
        np.testing.assert_allclose(kb, [[0.0, 0.0, 2.0 * np.tan(phi / 2.0)]], atol=1e-14)

    def test_folded_edges(self):
        e = np.array([[1.0, 0.0, 0.0]])
        with pytest.raises(AntiparallelEdges):
            curvature_binormal(e, -e)

    def test_collapsed_edge(self, straight):
        state, rest, frames = straight(5)
        positions = state.positions
        positions[2] = positions[1]
        with pytest.raises(DegenerateEdge):
            element_strains(StateVector.from_positions(positions), rest, frames)


class TestFrames:

    def test_initial_frames_are_orthonormal_with_zero_twist(self, arc):
        _, _, frames = arc(N_NODES, BEND)
        for a, b in ((frames.tangents, frames.d1), (frames.tangents, frames.d2), (frames.d1, frames.d2)):
            np.testing.assert_allclose(np.sum(a * b, axis=1), 0.0, atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(frames.d1, axis=1), 1.0, rtol=1e-12)
        np.testing.assert_allclose(frames.ref_twist, 0.0, atol=1e-12)

    def test_width_director_follows_hint(self, arc):
        _, _, frames = arc(N_NODES, BEND)
        np.testing.assert_allclose(frames.d1, np.tile([0.0, 1.0, 0.0], (N_NODES - 1, 1)), atol=1e-12)

    def test_update_with_same_tangents_is_identity(self, arc):
        state, _, frames = arc(N_NODES, BEND)
        moved = update_frames(frames, frames.tangents, state.thetas)
        np.testing.assert_allclose(moved.d1, frames.d1, atol=1e-14)
        np.testing.assert_allclose(moved.ref_twist, frames.ref_twist, atol=1e-14)

    def test_update_recomputes_material_directors(self, arc):
        state, _, frames = arc(N_NODES, BEND)
        thetas = np.full(N_NODES - 1, 0.25)
        moved = update_frames(frames, frames.tangents, thetas)
        np.testing.assert_allclose(moved.m1, np.cos(0.25) * frames.d1 + np.sin(0.25) * frames.d2, atol=1e-14)

    def test_reference_twist_tracks_history(self, straight):
        state, rest, frames = straight(5)
        frames.ref_twist[:] = 2.0 * np.pi
        moved = frames_for_state(state, frames)
        np.testing.assert_allclose(moved.ref_twist, 2.0 * np.pi, atol=1e-12)


class TestElementStrains:

    def test_straight_rod_is_unstrained(self, straight):
        state, rest, frames = straight(N_NODES)
        strains = element_strains(state, rest, frames)
        assert len(strains) == N_NODES - 2
        np.testing.assert_allclose(strains.as_array(), 0.0, atol=1e-14)

    def test_uniform_twist(self, straight):
        thetas = 0.1 * np.arange(N_NODES - 1)
        state, rest, frames = straight(N_NODES, thetas=thetas)
        strains = element_strains(state, rest, frames)
        np.testing.assert_allclose(strains.tau, 0.1, rtol=1e-12)
        np.testing.assert_allclose(strains.kappa1, 0.0, atol=1e-14)
        np.testing.assert_allclose(strains.kappa2, 0.0, atol=1e-14)

    def test_arc_bends_about_width(self, arc):
        state, positions, frames = arc(N_NODES, BEND)
        strains = element_strains(state, rest_configuration(positions), frames)
        turning = BEND / (N_NODES - 1)
        np.testing.assert_allclose(strains.kappa2, -2.0 * np.tan(turning / 2.0), rtol=1e-10)
        np.testing.assert_allclose(strains.kappa1, 0.0, atol=1e-12)
        np.testing.assert_allclose(strains.tau, 0.0, atol=1e-12)
        np.testing.assert_allclose(strains.eps, 0.0, atol=1e-12)

    def test_axial_strain_of_stretched_rod(self, straight):
        state, rest, frames = straight(N_NODES)
        stretched = StateVector.from_positions(state.positions * 1.01)
        strains = element_strains(stretched, rest, frames)
        np.testing.assert_allclose(strains.eps, 0.01, rtol=1e-10)

    def test_invariant_under_rigid_motion(self, arc, rng):
        state, positions, frames = arc(N_NODES, BEND)
        rest = rest_configuration(positions)
        thetas = rng.uniform(-0.3, 0.3, N_NODES - 1)
        state = StateVector.from_positions(positions, thetas)
        frames = frames.with_thetas(thetas)
        base = element_strains(state, rest, frames).as_array()

        rotation = Rotation.random(random_state=7).as_matrix()
        moved = StateVector.from_positions(positions @ rotation.T + [0.3, -1.0, 2.0], thetas)
        moved_frames = frames_for_state(moved, frames.rotated(rotation))
        np.testing.assert_allclose(element_strains(moved, rest, moved_frames).as_array(), base, atol=1e-12)

    def test_from_array_round_trip(self):
        values = np.arange(8, dtype=float).reshape(2, 4)
        np.testing.assert_array_equal(ElementStrain.from_array(values).as_array(), values)
