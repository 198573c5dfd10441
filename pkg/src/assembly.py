"""
Assembly Module
Chain-rule combination of constitutive and geometric derivatives, scattered
into a global force vector and a banded stiffness matrix
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .energy_models import evaluate_model
from .kinematics import StateVector, edge_vectors, element_strains, frames_for_state
from .strain_derivatives import ElementGeometry, element_derivatives

HALF_BANDWIDTH = 10
DEFAULT_PENALTY_SCALE = 1e10


def element_stencils(n_elements):
    """
    Global DOF indices of every element's 11 local DOFs.

    Args:
        n_elements (int): Number of elements (M-2)

    Returns:
        np.ndarray: (n_elements, 11) integer indices
    """
    k = np.arange(1, n_elements + 1)[:, None]
    xyz = np.arange(3)[None, :]
    return np.hstack([4 * (k - 1) + xyz, 4 * k + xyz, 4 * (k + 1) + xyz,
                      4 * (k - 1) + 3, 4 * k + 3])


@dataclass
class BandedSystem:
    """
    Square matrix in LAPACK-style band storage.

    ``band[hb + i - j, j]`` holds entry (i, j) for |i - j| <= hb; everything
    outside the band is zero by construction.
    """

    n_dof: int
    band: np.ndarray = None
    half_bandwidth: int = HALF_BANDWIDTH
    symmetric: bool = True

    def __post_init__(self):
        if self.band is None:
            self.band = np.zeros((2 * self.half_bandwidth + 1, self.n_dof))
        elif self.band.shape != (2 * self.half_bandwidth + 1, self.n_dof):
            raise ValueError(f"band storage has shape {self.band.shape}, expected "
                             f"{(2 * self.half_bandwidth + 1, self.n_dof)}")

    @classmethod
    def from_dense(cls, matrix, half_bandwidth=HALF_BANDWIDTH, symmetric=True):
        matrix = np.asarray(matrix, dtype=float)
        n = matrix.shape[0]
        system = cls(n, half_bandwidth=half_bandwidth, symmetric=symmetric)
        for offset in range(-half_bandwidth, half_bandwidth + 1):
            cols = np.arange(max(0, -offset), min(n, n - offset))
            system.band[half_bandwidth + offset, cols] = matrix[cols + offset, cols]
        return system

    @classmethod
    def identity(cls, n_dof, half_bandwidth=HALF_BANDWIDTH):
        return cls.diagonal_matrix(np.ones(n_dof), half_bandwidth)

    @classmethod
    def diagonal_matrix(cls, values, half_bandwidth=HALF_BANDWIDTH):
        values = np.asarray(values, dtype=float)
        system = cls(values.size, half_bandwidth=half_bandwidth)
        system.band[half_bandwidth] = values
        return system

    def copy(self):
        return BandedSystem(self.n_dof, self.band.copy(), self.half_bandwidth, self.symmetric)

    def to_dense(self):
        hb = self.half_bandwidth
        dense = np.zeros((self.n_dof, self.n_dof))
        for offset in range(-hb, hb + 1):
            cols = np.arange(max(0, -offset), min(self.n_dof, self.n_dof - offset))
            dense[cols + offset, cols] = self.band[hb + offset, cols]
        return dense

    def to_lapack(self):
        """Band storage padded with ``half_bandwidth`` rows for dgbtrf fill-in"""
        return np.vstack([np.zeros((self.half_bandwidth, self.n_dof)), self.band])

    def diagonal(self):
        return self.band[self.half_bandwidth].copy()

    def add_diagonal(self, values):
        self.band[self.half_bandwidth] += values
        return self

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        hb = self.half_bandwidth
        out = np.zeros(self.n_dof)
        for offset in range(-hb, hb + 1):
            cols = np.arange(max(0, -offset), min(self.n_dof, self.n_dof - offset))
            out[cols + offset] += self.band[hb + offset, cols] * x[cols]
        return out

    def norm1(self):
        """Induced 1-norm (largest absolute column sum)"""
        return float(np.max(np.sum(np.abs(self.band), axis=0))) if self.n_dof else 0.0

    def combined(self, other, scale=1.0):
        """self + scale * other, both with the same shape"""
        if other.n_dof != self.n_dof or other.half_bandwidth != self.half_bandwidth:
            raise ValueError("banded systems have different shapes")
        return BandedSystem(self.n_dof, self.band + scale * other.band, self.half_bandwidth,
                            self.symmetric and other.symmetric)

    def submatrix(self, indices):
        """
        Principal submatrix on sorted ``indices``, still in band storage.

        Dropping rows and columns never widens the band.
        """
        indices = np.asarray(indices, dtype=int)
        hb = self.half_bandwidth
        m = indices.size
        sub = BandedSystem(m, half_bandwidth=hb, symmetric=self.symmetric)
        for offset in range(-hb, hb + 1):
            cols = np.arange(max(0, -offset), min(m, m - offset))
            rows = cols + offset
            original = indices[rows] - indices[cols]
            inside = np.abs(original) <= hb
            sub.band[hb + offset, cols[inside]] = self.band[hb + original[inside], indices[cols[inside]]]
        return sub

    def asymmetry(self):
        """Largest |K_ij - K_ji| relative to the largest entry"""
        dense = self.to_dense()
        scale = np.max(np.abs(dense)) or 1.0
        return float(np.max(np.abs(dense - dense.T)) / scale)


@dataclass
class BoundaryConditions:
    """Fixed DOF indices with their prescribed values at the current time"""

    fixed_dofs: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    prescribed: np.ndarray = field(default_factory=lambda: np.zeros(0))
    penalty_scale: float = DEFAULT_PENALTY_SCALE

    def __post_init__(self):
        self.fixed_dofs = np.asarray(self.fixed_dofs, dtype=int).ravel()
        self.prescribed = np.asarray(self.prescribed, dtype=float).ravel()
        if self.fixed_dofs.shape != self.prescribed.shape:
            raise ConfigurationError("every fixed DOF needs exactly one prescribed value")
        if np.unique(self.fixed_dofs).size != self.fixed_dofs.size:
            raise ConfigurationError("fixed DOFs must be unique")
        order = np.argsort(self.fixed_dofs)
        self.fixed_dofs = self.fixed_dofs[order]
        self.prescribed = self.prescribed[order]
        if not self.penalty_scale > 0:
            raise ConfigurationError("penalty_scale must be positive")

    @classmethod
    def clamped(cls, q, fixed_dofs, penalty_scale=DEFAULT_PENALTY_SCALE):
        """Hold ``fixed_dofs`` at their values in ``q``"""
        fixed_dofs = np.asarray(fixed_dofs, dtype=int)
        return cls(fixed_dofs, np.asarray(q, dtype=float)[fixed_dofs], penalty_scale)

    def check(self, n_dof):
        if self.fixed_dofs.size and (self.fixed_dofs.min() < 0 or self.fixed_dofs.max() >= n_dof):
            raise ConfigurationError(f"fixed DOF index outside [0, {n_dof})")
        return self

    def free_dofs(self, n_dof):
        mask = np.ones(n_dof, dtype=bool)
        mask[self.fixed_dofs] = False
        return np.flatnonzero(mask)

    def impose(self, q):
        """Copy of ``q`` with the prescribed values written in"""
        q = np.array(q, dtype=float)
        q[self.fixed_dofs] = self.prescribed
        return q


def _leading_edge_stretch(state, rest, section, material):
    """Stretching energy of edge 0, which no element owns"""
    edges, lengths, tangents = edge_vectors(state.positions[:2])
    rest_length = rest.rest_edge_lengths[0]
    stiffness = material.youngs_modulus * section.area
    eps = lengths[0] / rest_length - 1.0
    t = tangents[0]
    energy = 0.5 * stiffness * rest_length * eps ** 2
    grad = stiffness * eps * t
    block = stiffness * (np.outer(t, t) / rest_length + eps * (np.eye(3) - np.outer(t, t)) / lengths[0])
    return energy, grad, block


def assemble(state, rest, frames, model, section, material, options=None, dense=False):
    """
    Total energy, internal force and tangent stiffness of the rod.

    Args:
        state (StateVector): Current configuration
        rest (RestConfiguration): Rest data
        frames (FrameSet): Frames consistent with ``state``
        model (str): Energy model identifier
        section (CrossSection): Cross-section
        material (MaterialParams): Material
        options (ModelOptions): Model guards
        dense (bool): Return the stiffness as a dense array (test oracle)

    Returns:
        tuple: (energy, F = -grad E, K = hess E as BandedSystem or ndarray)
    """
    geometry = ElementGeometry.from_rod(state, rest, frames)
    derivs = element_derivatives(geometry)
    law = evaluate_model(model, derivs.strains, rest.natural_strains, rest, section, material, options)

    grad_eff = law.effective_grad()
    local_grad = np.einsum('nl,nla->na', grad_eff, derivs.jacobian)
    local_hess = (np.einsum('nla,nlm,nmb->nab', derivs.jacobian, law.hess, derivs.jacobian)
                  + np.einsum('nl,nlab->nab', grad_eff, derivs.hessian))
    local_hess = 0.5 * (local_hess + np.transpose(local_hess, (0, 2, 1)))

    n_dof = state.n_dof
    stencil = element_stencils(len(geometry))
    grad = np.zeros(n_dof)
    np.add.at(grad, stencil, local_grad)

    edge_energy, edge_grad, edge_block = _leading_edge_stretch(state, rest, section, material)
    grad[0:3] -= edge_grad
    grad[4:7] += edge_grad

    rows = np.broadcast_to(stencil[:, :, None], local_hess.shape)
    cols = np.broadcast_to(stencil[:, None, :], local_hess.shape)
    head, tail = np.arange(0, 3), np.arange(4, 7)
    if dense:
        stiffness = np.zeros((n_dof, n_dof))
        np.add.at(stiffness, (rows, cols), local_hess)
        stiffness[np.ix_(head, head)] += edge_block
        stiffness[np.ix_(tail, tail)] += edge_block
        stiffness[np.ix_(head, tail)] -= edge_block
        stiffness[np.ix_(tail, head)] -= edge_block
    else:
        stiffness = BandedSystem(n_dof)
        np.add.at(stiffness.band, (HALF_BANDWIDTH + rows - cols, cols), local_hess)
        for r_block, c_block, sign in ((head, head, 1.0), (tail, tail, 1.0), (head, tail, -1.0), (tail, head, -1.0)):
            r, c = np.meshgrid(r_block, c_block, indexing='ij')
            np.add.at(stiffness.band, (HALF_BANDWIDTH + r - c, c), sign * edge_block)

    energy = float(np.sum(law.energy)) + edge_energy
    return energy, -grad, stiffness


def apply_bc(system, F, bc, q):
    """
    Diagonal penalty enforcement of fixed DOFs.

    Args:
        system (BandedSystem): Matrix of the linear step
        F (np.ndarray): Right-hand side
        bc (BoundaryConditions): Fixed DOFs and prescribed values
        q (np.ndarray): Current configuration

    Returns:
        tuple: (modified BandedSystem, modified right-hand side); inputs untouched
    """
    system = system.copy()
    F = np.array(F, dtype=float)
    if bc.fixed_dofs.size == 0:
        return system, F
    bc.check(system.n_dof)
    penalty = bc.penalty_scale * (float(np.max(np.abs(system.diagonal()))) or 1.0)
    system.band[system.half_bandwidth, bc.fixed_dofs] += penalty
    F[bc.fixed_dofs] += penalty * (bc.prescribed - np.asarray(q, dtype=float)[bc.fixed_dofs])
    return system, F


def total_energy(q, rest, base_frames, model, section, material, options=None):
    """
    Energy of configuration ``q`` with frames transported from ``base_frames``.

    This is the same transport rule the integrator applies between iterates,
    so its finite differences reproduce the assembled force.
    """
    state = StateVector(q)
    frames = frames_for_state(state, base_frames)
    strains = element_strains(state, rest, frames)
    law = evaluate_model(model, strains, rest.natural_strains, rest, section, material, options)
    edge_energy, _, _ = _leading_edge_stretch(state, rest, section, material)
    return float(np.sum(law.energy)) + edge_energy
