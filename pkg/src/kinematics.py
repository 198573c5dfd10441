"""
Kinematics Module
Discrete centerline, parallel-transported frames and element strain measures

DOFs are interleaved as [x0(3), theta0, x1(3), theta1, ..., x_{M-1}(3)], so a
rod with M nodes has 4M - 1 unknowns and every three-node element touches a
contiguous block of 11 of them.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import AntiparallelEdges, AntiparallelTangents, DegenerateEdge

LENGTH_EPSILON = 1e-12
ANTIPARALLEL_EPSILON = 1e-12


def dof_count(n_nodes):
    """Number of DOFs of a rod with ``n_nodes`` nodes"""
    return 4 * n_nodes - 1


def node_dofs(node):
    """Global indices of the three coordinates of ``node``"""
    return np.arange(4 * node, 4 * node + 3)


def theta_dof(edge):
    """Global index of the twist angle of ``edge``"""
    return 4 * edge + 3


def pack_dofs(positions, thetas):
    """
    Interleave node positions and edge twist angles into one DOF vector.

    Args:
        positions (np.ndarray): (M, 3) node coordinates
        thetas (np.ndarray): (M-1,) twist angles

    Returns:
        np.ndarray: (4M-1,) DOF vector
    """
    positions = np.asarray(positions, dtype=float)
    n_nodes = positions.shape[0]
    padded = np.zeros((n_nodes, 4))
    padded[:, :3] = positions
    padded[:-1, 3] = thetas
    return padded.reshape(-1)[:-1].copy()


def unpack_dofs(q):
    """
    Split an interleaved DOF vector into positions and twist angles.

    Returns:
        tuple: ((M, 3) positions, (M-1,) thetas)
    """
    q = np.asarray(q, dtype=float)
    n_nodes = (q.size + 1) // 4
    padded = np.append(q, 0.0).reshape(n_nodes, 4)
    return padded[:, :3].copy(), padded[:-1, 3].copy()


@dataclass
class StateVector:
    """Configuration q (interleaved) and its rate q_dot"""

    q: np.ndarray
    q_dot: np.ndarray = None

    def __post_init__(self):
        self.q = np.array(self.q, dtype=float)
        if self.q_dot is None:
            self.q_dot = np.zeros_like(self.q)
        else:
            self.q_dot = np.array(self.q_dot, dtype=float)

        if self.q.ndim != 1 or self.q.size % 4 != 3 or self.q.size < dof_count(3):
            raise ValueError(f"state dimension must be 4M-1 with M >= 3, got {self.q.size}")
        if self.q_dot.shape != self.q.shape:
            raise ValueError("velocity dimension does not match the configuration")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.q_dot))):
            raise ValueError("state contains non-finite entries")

    @classmethod
    def from_positions(cls, positions, thetas=None, velocities=None):
        positions = np.asarray(positions, dtype=float)
        if thetas is None:
            thetas = np.zeros(positions.shape[0] - 1)
        return cls(pack_dofs(positions, thetas), velocities)

    @property
    def n_nodes(self):
        return (self.q.size + 1) // 4

    @property
    def n_dof(self):
        return self.q.size

    @property
    def positions(self):
        return unpack_dofs(self.q)[0]

    @property
    def thetas(self):
        return unpack_dofs(self.q)[1]

    def copy(self):
        return StateVector(self.q.copy(), self.q_dot.copy())


@dataclass
class RestConfiguration:
    """Rest edge lengths, Voronoi lengths and natural strains of a rod"""

    rest_edge_lengths: np.ndarray
    natural_strains: np.ndarray = None
    voronoi_lengths: np.ndarray = field(init=False)

    def __post_init__(self):
        self.rest_edge_lengths = np.array(self.rest_edge_lengths, dtype=float)
        if self.rest_edge_lengths.size < 2:
            raise ValueError("a rod needs at least two edges")
        if np.any(self.rest_edge_lengths <= 0.0):
            raise ValueError("rest edge lengths must be strictly positive")
        n_elements = self.rest_edge_lengths.size - 1
        if self.natural_strains is None:
            self.natural_strains = np.zeros((n_elements, 3))
        else:
            self.natural_strains = np.array(self.natural_strains, dtype=float).reshape(n_elements, 3)
        self.voronoi_lengths = 0.5 * (self.rest_edge_lengths[:-1] + self.rest_edge_lengths[1:])

    @property
    def n_nodes(self):
        return self.rest_edge_lengths.size + 1

    @property
    def n_elements(self):
        return self.rest_edge_lengths.size - 1

    @property
    def element_edge_lengths(self):
        """Rest length of each element's trailing edge (edge k for node k)"""
        return self.rest_edge_lengths[1:]


def rest_configuration(positions, natural_strains=None):
    """
    Build the rest configuration from stress-free node positions.

    Args:
        positions (np.ndarray): (M, 3) rest positions
        natural_strains (np.ndarray): Optional (M-2, 3) natural [kappa1, kappa2, tau]

    Returns:
        RestConfiguration: Rest data of the rod
    """
    lengths = np.linalg.norm(np.diff(np.asarray(positions, dtype=float), axis=0), axis=1)
    return RestConfiguration(lengths, natural_strains)


@dataclass
class EdgeQuantities:
    edges: np.ndarray
    lengths: np.ndarray
    tangents: np.ndarray
    eps: np.ndarray


def edge_vectors(positions):
    """Edge vectors, lengths and unit tangents of a node array"""
    edges = np.diff(positions, axis=0)
    lengths = np.linalg.norm(edges, axis=1)
    short = np.flatnonzero(lengths < LENGTH_EPSILON)
    if short.size:
        raise DegenerateEdge(f"edge {short[0]} collapsed (length {lengths[short[0]]:.3e} m)",
                             edge=int(short[0]))
    return edges, lengths, edges / lengths[:, None]


def edge_quantities(state, rest):
    """
    Edge vectors, lengths, unit tangents and axial strains.

    Args:
        state (StateVector): Current configuration
        rest (RestConfiguration): Rest data

    Returns:
        EdgeQuantities: Per-edge arrays

    Raises:
        DegenerateEdge: If any edge is shorter than LENGTH_EPSILON
    """
    edges, lengths, tangents = edge_vectors(state.positions)
    return EdgeQuantities(edges, lengths, tangents, lengths / rest.rest_edge_lengths - 1.0)


def parallel_transport(v, t_from, t_to):
    """
    Minimal rotation taking ``t_from`` to ``t_to`` applied to ``v``.

    Works row-wise on stacked (..., 3) arrays.

    Raises:
        AntiparallelTangents: If the tangents are opposite
    """
    v = np.asarray(v, dtype=float)
    a = np.asarray(t_from, dtype=float)
    b = np.asarray(t_to, dtype=float)
    c = np.sum(a * b, axis=-1)
    if np.any(c <= -1.0 + ANTIPARALLEL_EPSILON):
        raise AntiparallelTangents("cannot transport between antiparallel tangents")
    n = np.cross(a, b)
    n_dot_v = np.sum(n * v, axis=-1)
    return (np.expand_dims(c, -1) * v + np.cross(n, v)
            + np.expand_dims(n_dot_v / (1.0 + c), -1) * n)


def signed_angle(u, v, axis):
    """Angle from u to v, positive about ``axis`` (row-wise)"""
    return np.arctan2(np.sum(np.cross(u, v) * axis, axis=-1), np.sum(u * v, axis=-1))


def curvature_binormal(e_prev, e_next):
    """
    Discrete curvature binormal 2 e x f / (|e||f| + e.f), row-wise.

    Raises:
        AntiparallelEdges: If consecutive edges fold back
    """
    e_prev = np.asarray(e_prev, dtype=float)
    e_next = np.asarray(e_next, dtype=float)
    norms = np.linalg.norm(e_prev, axis=-1) * np.linalg.norm(e_next, axis=-1)
    denominator = norms + np.sum(e_prev * e_next, axis=-1)
    if np.any(denominator < ANTIPARALLEL_EPSILON * norms):
        raise AntiparallelEdges("consecutive edges are antiparallel")
    return 2.0 * np.cross(e_prev, e_next) / np.expand_dims(denominator, -1)


def material_directors(d1, d2, thetas):
    """Rotate reference directors by the twist angles"""
    cos_t = np.cos(thetas)[:, None]
    sin_t = np.sin(thetas)[:, None]
    return cos_t * d1 + sin_t * d2, cos_t * d2 - sin_t * d1


def wrap_angle(angle):
    return (angle + np.pi) % (2.0 * np.pi) - np.pi


def _reference_twist(d1, tangents, previous=None):
    transported = parallel_transport(d1[:-1], tangents[:-1], tangents[1:])
    angle = signed_angle(transported, d1[1:], tangents[1:])
    if previous is None:
        return angle
    # keep the twist continuous in time instead of folding it into (-pi, pi]
    return previous + wrap_angle(angle - previous)


@dataclass
class FrameSet:
    """Per-edge reference and material triads plus per-node reference twist"""

    tangents: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    m1: np.ndarray
    m2: np.ndarray
    ref_twist: np.ndarray

    def copy(self):
        return FrameSet(self.tangents.copy(), self.d1.copy(), self.d2.copy(),
                        self.m1.copy(), self.m2.copy(), self.ref_twist.copy())

    def rotated(self, rotation):
        """Apply one rotation matrix to every director (twist unchanged)"""
        rotation = np.asarray(rotation, dtype=float)
        return FrameSet(self.tangents @ rotation.T, self.d1 @ rotation.T, self.d2 @ rotation.T,
                        self.m1 @ rotation.T, self.m2 @ rotation.T, self.ref_twist.copy())

    def with_thetas(self, thetas):
        """Recompute material directors for new twist angles"""
        m1, m2 = material_directors(self.d1, self.d2, thetas)
        return FrameSet(self.tangents, self.d1, self.d2, m1, m2, self.ref_twist)


def orthonormalize_against(d1, tangents):
    d1 = d1 - np.sum(d1 * tangents, axis=1)[:, None] * tangents
    return d1 / np.linalg.norm(d1, axis=1)[:, None]


def initialize_frames(positions, thetas, d1_hint=None):
    """
    Build the initial frames by space-parallel transport along the rod.

    Args:
        positions (np.ndarray): (M, 3) node coordinates
        thetas (np.ndarray): (M-1,) twist angles
        d1_hint (np.ndarray): Optional direction for the first reference
            director; projected onto the plane normal to the first tangent.
            Defaults to the coordinate axis least aligned with that tangent.

    Returns:
        FrameSet: Frames with zero reference twist up to round-off
    """
    _, _, tangents = edge_vectors(np.asarray(positions, dtype=float))
    if d1_hint is None:
        d1_hint = np.zeros(3)
        d1_hint[np.argmin(np.abs(tangents[0]))] = 1.0
    first = np.asarray(d1_hint, dtype=float)
    first = first - np.dot(first, tangents[0]) * tangents[0]
    norm = np.linalg.norm(first)
    if norm < LENGTH_EPSILON:
        raise ValueError("d1 hint is parallel to the first tangent")

    d1 = np.empty_like(tangents)
    d1[0] = first / norm
    for i in range(1, tangents.shape[0]):
        d1[i] = parallel_transport(d1[i - 1], tangents[i - 1], tangents[i])
    d1 = orthonormalize_against(d1, tangents)
    d2 = np.cross(tangents, d1)
    m1, m2 = material_directors(d1, d2, np.asarray(thetas, dtype=float))
    return FrameSet(tangents, d1, d2, m1, m2, _reference_twist(d1, tangents))


def update_frames(prev, new_tangents, thetas):
    """
    Time-parallel transport of the reference frames to new tangents.

    Args:
        prev (FrameSet): Frames at the previous configuration
        new_tangents (np.ndarray): (M-1, 3) unit tangents of the new configuration
        thetas (np.ndarray): (M-1,) twist angles of the new configuration

    Returns:
        FrameSet: Transported frames with history-consistent reference twist

    Raises:
        AntiparallelTangents: If a tangent reversed within one update
    """
    new_tangents = np.asarray(new_tangents, dtype=float)
    d1 = parallel_transport(prev.d1, prev.tangents, new_tangents)
    d1 = orthonormalize_against(d1, new_tangents)
    d2 = np.cross(new_tangents, d1)
    m1, m2 = material_directors(d1, d2, np.asarray(thetas, dtype=float))
    ref_twist = _reference_twist(d1, new_tangents, prev.ref_twist)
    return FrameSet(new_tangents, d1, d2, m1, m2, ref_twist)


def frames_for_state(state, prev):
    """Frames of ``state`` transported from the frames ``prev``"""
    _, _, tangents = edge_vectors(state.positions)
    return update_frames(prev, tangents, state.thetas)


@dataclass
class ElementStrain:
    """Strains [eps, kappa1, kappa2, tau] of every interior node"""

    eps: np.ndarray
    kappa1: np.ndarray
    kappa2: np.ndarray
    tau: np.ndarray

    def as_array(self):
        return np.column_stack([self.eps, self.kappa1, self.kappa2, self.tau])

    @classmethod
    def from_array(cls, values):
        values = np.asarray(values, dtype=float).reshape(-1, 4)
        return cls(values[:, 0].copy(), values[:, 1].copy(), values[:, 2].copy(), values[:, 3].copy())

    def __len__(self):
        return self.eps.size


def element_strains(state, rest, frames):
    """
    Strain measures of all M-2 elements.

    The element at interior node k uses edges k-1 and k; its axial strain is
    the strain of edge k.

    Args:
        state (StateVector): Current configuration
        rest (RestConfiguration): Rest data
        frames (FrameSet): Frames consistent with ``state``

    Returns:
        ElementStrain: Per-element strains
    """
    edges, lengths, _ = edge_vectors(state.positions)
    kb = curvature_binormal(edges[:-1], edges[1:])
    kappa1 = 0.5 * np.sum((frames.m2[:-1] + frames.m2[1:]) * kb, axis=1)
    kappa2 = -0.5 * np.sum((frames.m1[:-1] + frames.m1[1:]) * kb, axis=1)
    thetas = state.thetas
    tau = thetas[1:] - thetas[:-1] + frames.ref_twist
    eps = lengths[1:] / rest.element_edge_lengths - 1.0
    return ElementStrain(eps, kappa1, kappa2, tau)
