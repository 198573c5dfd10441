"""
Strain Derivatives Module
Exact first and second derivatives of element strains with respect to the
11 local DOFs [x_{k-1}(3), x_k(3), x_{k+1}(3), theta^{k-1}, theta^k]

Derivatives are taken with the frames carried along by time-parallel
transport from the element's current state, the same rule the integrator
uses between Newton iterates. Everything is vectorized over a batch of
elements; shapes carry the batch size n in front.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEdge
from .kinematics import (
    LENGTH_EPSILON,
    ElementStrain,
    curvature_binormal,
    material_directors,
    orthonormalize_against,
    parallel_transport,
    signed_angle,
    wrap_angle,
)

LOCAL_DOFS = 11
EDGE_VARIABLES = 8

LEVI_CIVITA = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    LEVI_CIVITA[_i, _j, _k] = 1.0
    LEVI_CIVITA[_i, _k, _j] = -1.0

# [e(3), f(3), theta_e, theta_f] in terms of the local DOFs
EDGE_TO_LOCAL = np.zeros((EDGE_VARIABLES, LOCAL_DOFS))
EDGE_TO_LOCAL[0:3, 0:3] = -np.eye(3)
EDGE_TO_LOCAL[0:3, 3:6] = np.eye(3)
EDGE_TO_LOCAL[3:6, 3:6] = -np.eye(3)
EDGE_TO_LOCAL[3:6, 6:9] = np.eye(3)
EDGE_TO_LOCAL[6, 9] = 1.0
EDGE_TO_LOCAL[7, 10] = 1.0


@dataclass
class ElementGeometry:
    """
    Batch of three-node elements.

    Attributes:
        dofs (np.ndarray): (n, 11) local DOF values
        d1_prev (np.ndarray): (n, 3) reference director of edge k-1
        d1_next (np.ndarray): (n, 3) reference director of edge k
        ref_twist (np.ndarray): (n,) reference twist at node k
        rest_length (np.ndarray): (n,) rest length of edge k
    """

    dofs: np.ndarray
    d1_prev: np.ndarray
    d1_next: np.ndarray
    ref_twist: np.ndarray
    rest_length: np.ndarray

    @classmethod
    def from_rod(cls, state, rest, frames):
        positions, thetas = state.positions, state.thetas
        dofs = np.column_stack([positions[:-2], positions[1:-1], positions[2:],
                                thetas[:-1], thetas[1:]])
        return cls(dofs, frames.d1[:-1].copy(), frames.d1[1:].copy(),
                   frames.ref_twist.copy(), rest.element_edge_lengths.copy())

    def __len__(self):
        return self.dofs.shape[0]

    def perturbed(self, dofs):
        """
        Geometry at new local DOFs with frames transported from this one.

        Args:
            dofs (np.ndarray): (n, 11) new local DOF values

        Returns:
            ElementGeometry: Geometry whose directors and reference twist
            follow the same update rule as the time stepper
        """
        dofs = np.asarray(dofs, dtype=float).reshape(-1, LOCAL_DOFS)
        base = _edge_tangents(self.dofs)
        moved = _edge_tangents(dofs)
        d1_prev = orthonormalize_against(parallel_transport(self.d1_prev, base[2], moved[2]), moved[2])
        d1_next = orthonormalize_against(parallel_transport(self.d1_next, base[3], moved[3]), moved[3])
        angle = signed_angle(parallel_transport(d1_prev, moved[2], moved[3]), d1_next, moved[3])
        ref_twist = self.ref_twist + wrap_angle(angle - self.ref_twist)
        return ElementGeometry(dofs, d1_prev, d1_next, ref_twist, self.rest_length)


@dataclass
class ElementDerivatives:
    """Strains, 4x11 Jacobians and 4x11x11 Hessians of a batch of elements"""

    strains: ElementStrain
    jacobian: np.ndarray
    hessian: np.ndarray = None


def _edge_tangents(dofs):
    e = dofs[:, 3:6] - dofs[:, 0:3]
    f = dofs[:, 6:9] - dofs[:, 3:6]
    len_e = np.linalg.norm(e, axis=1)
    len_f = np.linalg.norm(f, axis=1)
    if np.any(len_e < LENGTH_EPSILON) or np.any(len_f < LENGTH_EPSILON):
        raise DegenerateEdge("element edge collapsed")
    return e, f, e / len_e[:, None], f / len_f[:, None], len_e, len_f


def _skew(v):
    s = np.zeros(v.shape[:-1] + (3, 3))
    s[..., 0, 1] = -v[..., 2]
    s[..., 0, 2] = v[..., 1]
    s[..., 1, 0] = v[..., 2]
    s[..., 1, 2] = -v[..., 0]
    s[..., 2, 0] = -v[..., 1]
    s[..., 2, 1] = v[..., 0]
    return s


def _tangent_derivatives(t, length):
    """dt/de (n,3,3) and d2t/de2 (n,3,3,3) of t = e/|e|"""
    eye = np.eye(3)
    first = (eye[None] - t[:, :, None] * t[:, None, :]) / length[:, None, None]
    second = (-(eye[None, :, :, None] * t[:, None, None, :])
              - (eye[None, :, None, :] * t[:, None, :, None])
              - (eye[None, None, :, :] * t[:, :, None, None])
              + 3.0 * t[:, :, None, None] * t[:, None, :, None] * t[:, None, None, :])
    return first, second / length[:, None, None, None] ** 2


def _director_derivatives(mu, dmu, t, length):
    """
    Derivatives of a transported director m(e, theta) at the base state.

    Returns:
        tuple: dm/de (n,3,3), d2m/de dtheta (n,3,3), d2m/de2 (n,3,3,3)
    """
    eye = np.eye(3)
    first = -t[:, :, None] * mu[:, None, :] / length[:, None, None]
    mixed = -t[:, :, None] * dmu[:, None, :] / length[:, None, None]
    c = np.cross(mu, t)
    s = _skew(t)
    second = (mu[:, :, None, None] * (t[:, None, :, None] * t[:, None, None, :] - eye[None, None])
              + t[:, :, None, None] * (mu[:, None, :, None] * t[:, None, None, :]
                                       + t[:, None, :, None] * mu[:, None, None, :])
              + 0.5 * (c[:, None, :, None] * s[:, :, None, :] + c[:, None, None, :] * s[:, :, :, None]))
    return first, mixed, second / length[:, None, None, None] ** 2


def _director_sum_derivatives(prev, nxt):
    """Gradient (n,3,8) and Hessian (n,3,8,8) of m^{k-1} + m^k in edge variables"""
    n = prev[0].shape[0]
    grad = np.zeros((n, 3, EDGE_VARIABLES))
    hess = np.zeros((n, 3, EDGE_VARIABLES, EDGE_VARIABLES))
    for (mu, dmu, ddmu, t, length), block, angle in ((prev, slice(0, 3), 6), (nxt, slice(3, 6), 7)):
        first, mixed, second = _director_derivatives(mu, dmu, t, length)
        grad[:, :, block] = first
        grad[:, :, angle] = dmu
        hess[:, :, block, block] = second
        hess[:, :, block, angle] = mixed
        hess[:, :, angle, block] = mixed
        hess[:, :, angle, angle] = ddmu
    return grad, hess


def _binormal_derivatives(e, f, t_e, t_f, len_e, len_f):
    """kb (n,3), gradient (n,3,6) and Hessian (n,3,6,6) in edge vectors (e, f)"""
    n = e.shape[0]
    eye = np.eye(3)
    cross = np.cross(e, f)
    denom = len_e * len_f + np.sum(e * f, axis=1)

    cross_z = np.concatenate([-_skew(f), _skew(e)], axis=2)
    cross_zz = np.zeros((n, 3, 6, 6))
    cross_zz[:, :, 0:3, 3:6] = LEVI_CIVITA
    cross_zz[:, :, 3:6, 0:3] = LEVI_CIVITA.transpose(0, 2, 1)

    denom_z = np.concatenate([len_f[:, None] * t_e + f, len_e[:, None] * t_f + e], axis=1)
    denom_zz = np.zeros((n, 6, 6))
    denom_zz[:, 0:3, 0:3] = (len_f / len_e)[:, None, None] * (eye - t_e[:, :, None] * t_e[:, None, :])
    denom_zz[:, 3:6, 3:6] = (len_e / len_f)[:, None, None] * (eye - t_f[:, :, None] * t_f[:, None, :])
    denom_zz[:, 0:3, 3:6] = t_e[:, :, None] * t_f[:, None, :] + eye
    denom_zz[:, 3:6, 0:3] = denom_zz[:, 0:3, 3:6].transpose(0, 2, 1)

    d = denom[:, None]
    kb = 2.0 * cross / d
    grad = 2.0 * (cross_z / d[:, :, None] - cross[:, :, None] * denom_z[:, None, :] / (d ** 2)[:, :, None])
    d3 = denom[:, None, None, None]
    hess = 2.0 * (cross_zz / d3
                  - (cross_z[:, :, :, None] * denom_z[:, None, None, :]
                     + cross_z[:, :, None, :] * denom_z[:, None, :, None]) / d3 ** 2
                  - cross[:, :, None, None] * denom_zz[:, None] / d3 ** 2
                  + 2.0 * cross[:, :, None, None] * denom_z[:, None, :, None] * denom_z[:, None, None, :] / d3 ** 3)
    return kb, grad, hess


def _atan2_derivatives(y, x, y_v, x_v, y_vv, x_vv):
    """Gradient and Hessian of 2 atan2(y, x)"""
    r = x ** 2 + y ** 2
    f = x[:, None] * y_v - y[:, None] * x_v
    grad = 2.0 * f / r[:, None]
    r_v = 2.0 * (x[:, None] * x_v + y[:, None] * y_v)
    hess = 2.0 * ((y_v[:, :, None] * x_v[:, None, :] - x_v[:, :, None] * y_v[:, None, :]
                   + x[:, None, None] * y_vv - y[:, None, None] * x_vv) / r[:, None, None]
                  - f[:, :, None] * r_v[:, None, :] / (r ** 2)[:, None, None])
    return grad, 0.5 * (hess + hess.transpose(0, 2, 1))


def _reference_twist_derivatives(t_e, t_f, len_e, len_f):
    """
    Gradient (n,6) and Hessian (n,6,6) of the reference twist in (e, f).

    A change of tangents moves the reference twist by minus the signed area
    of the geodesic loop t_f -> t_e -> t_e' -> t_f' on the unit sphere, split
    into the triangles (t_f, t_e, t_e') and (t_f, t_e', t_f').
    """
    n = t_e.shape[0]
    eye = np.eye(3)
    x = 2.0 + 2.0 * np.sum(t_e * t_f, axis=1)
    y = np.zeros(n)
    zero_vv = np.zeros((n, 6, 6))
    f_cross_e = np.cross(t_f, t_e)

    y1_v = np.zeros((n, 6))
    y1_v[:, 0:3] = f_cross_e
    x1_v = np.zeros((n, 6))
    x1_v[:, 0:3] = t_e + t_f
    g1, h1 = _atan2_derivatives(y, x, y1_v, x1_v, zero_vv, zero_vv)

    y2_v = np.zeros((n, 6))
    y2_v[:, 3:6] = f_cross_e
    x2_v = np.concatenate([2.0 * t_f, t_e + t_f], axis=1)
    y2_vv = np.zeros((n, 6, 6))
    y2_vv[:, 0:3, 3:6] = np.einsum('abc,nc->nab', LEVI_CIVITA, t_f)
    y2_vv[:, 3:6, 0:3] = y2_vv[:, 0:3, 3:6].transpose(0, 2, 1)
    x2_vv = np.zeros((n, 6, 6))
    x2_vv[:, 0:3, 3:6] = eye
    x2_vv[:, 3:6, 0:3] = eye
    g2, h2 = _atan2_derivatives(y, x, y2_v, x2_v, y2_vv, x2_vv)

    grad_t = -(g1 + g2)
    hess_t = -(h1 + h2)

    proj_e, second_e = _tangent_derivatives(t_e, len_e)
    proj_f, second_f = _tangent_derivatives(t_f, len_f)
    chain = np.zeros((n, 6, 6))
    chain[:, 0:3, 0:3] = proj_e
    chain[:, 3:6, 3:6] = proj_f

    grad = np.einsum('np,npa->na', grad_t, chain)
    hess = np.einsum('npa,npq,nqb->nab', chain, hess_t, chain)
    hess[:, 0:3, 0:3] += np.einsum('ni,nijk->njk', grad_t[:, 0:3], second_e)
    hess[:, 3:6, 3:6] += np.einsum('ni,nijk->njk', grad_t[:, 3:6], second_f)
    return grad, hess


def _projection(vec, vec_w, vec_ww, kb, kb_w, kb_ww, scale, with_hessian):
    value = scale * np.sum(vec * kb, axis=1)
    grad = scale * (np.einsum('ni,nip->np', kb, vec_w) + np.einsum('ni,nip->np', vec, kb_w))
    if not with_hessian:
        return value, grad, None
    hess = scale * (np.einsum('ni,nipq->npq', kb, vec_ww)
                    + np.einsum('nip,niq->npq', vec_w, kb_w)
                    + np.einsum('nip,niq->npq', kb_w, vec_w)
                    + np.einsum('ni,nipq->npq', vec, kb_ww))
    return value, grad, hess


def element_derivatives(geometry, with_hessian=True):
    """
    Strains, Jacobians and (optionally) Hessians of a batch of elements.

    Args:
        geometry (ElementGeometry): Elements at their current state
        with_hessian (bool): Also compute the 4x11x11 strain Hessians

    Returns:
        ElementDerivatives: Rows ordered [eps, kappa1, kappa2, tau]
    """
    e, f, t_e, t_f, len_e, len_f = _edge_tangents(geometry.dofs)
    n = e.shape[0]
    theta_e = geometry.dofs[:, 9]
    theta_f = geometry.dofs[:, 10]

    d2_prev = np.cross(t_e, geometry.d1_prev)
    d2_next = np.cross(t_f, geometry.d1_next)
    m1_e, m2_e = material_directors(geometry.d1_prev, d2_prev, theta_e)
    m1_f, m2_f = material_directors(geometry.d1_next, d2_next, theta_f)

    kb, kb_z, kb_zz = _binormal_derivatives(e, f, t_e, t_f, len_e, len_f)
    kb_w = np.zeros((n, 3, EDGE_VARIABLES))
    kb_w[:, :, :6] = kb_z
    kb_ww = np.zeros((n, 3, EDGE_VARIABLES, EDGE_VARIABLES))
    kb_ww[:, :, :6, :6] = kb_zz

    m2_sum_w, m2_sum_ww = _director_sum_derivatives(
        (m2_e, -m1_e, -m2_e, t_e, len_e), (m2_f, -m1_f, -m2_f, t_f, len_f))
    m1_sum_w, m1_sum_ww = _director_sum_derivatives(
        (m1_e, m2_e, -m1_e, t_e, len_e), (m1_f, m2_f, -m1_f, t_f, len_f))

    kappa1, k1_w, k1_ww = _projection(m2_e + m2_f, m2_sum_w, m2_sum_ww, kb, kb_w, kb_ww, 0.5, with_hessian)
    kappa2, k2_w, k2_ww = _projection(m1_e + m1_f, m1_sum_w, m1_sum_ww, kb, kb_w, kb_ww, -0.5, with_hessian)

    rest = geometry.rest_length
    eps = len_f / rest - 1.0
    tau = theta_f - theta_e + geometry.ref_twist

    jac_w = np.zeros((n, 4, EDGE_VARIABLES))
    jac_w[:, 0, 3:6] = t_f / rest[:, None]
    jac_w[:, 1] = k1_w
    jac_w[:, 2] = k2_w
    twist_grad, twist_hess = _reference_twist_derivatives(t_e, t_f, len_e, len_f)
    jac_w[:, 3, :6] = twist_grad
    jac_w[:, 3, 6] = -1.0
    jac_w[:, 3, 7] = 1.0

    strains = ElementStrain(eps, kappa1, kappa2, tau)
    jacobian = np.einsum('nlp,pa->nla', jac_w, EDGE_TO_LOCAL)
    if not with_hessian:
        return ElementDerivatives(strains, jacobian)

    hess_w = np.zeros((n, 4, EDGE_VARIABLES, EDGE_VARIABLES))
    hess_w[:, 0, 3:6, 3:6] = ((np.eye(3) - t_f[:, :, None] * t_f[:, None, :])
                              / (len_f * rest)[:, None, None])
    hess_w[:, 1] = k1_ww
    hess_w[:, 2] = k2_ww
    hess_w[:, 3, :6, :6] = twist_hess
    hessian = np.einsum('pa,nlpq,qb->nlab', EDGE_TO_LOCAL, hess_w, EDGE_TO_LOCAL)
    return ElementDerivatives(strains, jacobian, hessian)


def strain_jacobian(geometry):
    """4x11 strain Jacobian of every element, shape (n, 4, 11)"""
    return element_derivatives(geometry, with_hessian=False).jacobian


def strain_hessian(geometry):
    """4x11x11 strain Hessian of every element, shape (n, 4, 11, 11)"""
    return element_derivatives(geometry).hessian


def local_strains(geometry, dofs):
    """
    Strains at perturbed local DOFs, frames transported from ``geometry``.

    This follows the kinematics code path (transport, re-orthonormalize,
    signed reference twist) and is the finite-difference reference for
    the closed-form derivatives.

    Args:
        geometry (ElementGeometry): Base elements
        dofs (np.ndarray): (n, 11) perturbed local DOFs

    Returns:
        np.ndarray: (n, 4) strains [eps, kappa1, kappa2, tau]
    """
    moved = geometry.perturbed(dofs)
    e, f, t_e, t_f, _, len_f = _edge_tangents(moved.dofs)
    m1_e, m2_e = material_directors(moved.d1_prev, np.cross(t_e, moved.d1_prev), moved.dofs[:, 9])
    m1_f, m2_f = material_directors(moved.d1_next, np.cross(t_f, moved.d1_next), moved.dofs[:, 10])
    kb = curvature_binormal(e, f)
    return np.column_stack([
        len_f / moved.rest_length - 1.0,
        0.5 * np.sum((m2_e + m2_f) * kb, axis=1),
        -0.5 * np.sum((m1_e + m1_f) * kb, axis=1),
        moved.dofs[:, 10] - moved.dofs[:, 9] + moved.ref_twist,
    ])


def random_elements(rng, count, max_bend=2.5):
    """
    Random non-degenerate elements with consistent frames.

    Used by the validation suite and the tests.

    Args:
        rng (np.random.Generator): Random source
        count (int): Number of elements
        max_bend (float): Upper bound of the turning angle between edges (rad)

    Returns:
        ElementGeometry: Random batch
    """
    x0 = rng.normal(size=(count, 3))
    t_e = rng.normal(size=(count, 3))
    t_e /= np.linalg.norm(t_e, axis=1)[:, None]
    axis = np.cross(t_e, rng.normal(size=(count, 3)))
    axis /= np.linalg.norm(axis, axis=1)[:, None]
    bend = rng.uniform(0.05, max_bend, size=count)
    t_f = (np.cos(bend)[:, None] * t_e + np.sin(bend)[:, None] * np.cross(axis, t_e))
    len_e = rng.uniform(0.5, 1.5, size=count)
    len_f = rng.uniform(0.5, 1.5, size=count)
    x1 = x0 + len_e[:, None] * t_e
    x2 = x1 + len_f[:, None] * t_f
    thetas = rng.uniform(-np.pi, np.pi, size=(count, 2))

    d1_prev = orthonormalize_against(rng.normal(size=(count, 3)), t_e)
    ref_twist = rng.uniform(-1.0, 1.0, size=count)
    carried = parallel_transport(d1_prev, t_e, t_f)
    d1_next = (np.cos(ref_twist)[:, None] * carried
               + np.sin(ref_twist)[:, None] * np.cross(t_f, carried))
    rest = len_f * rng.uniform(0.8, 1.2, size=count)
    dofs = np.column_stack([x0, x1, x2, thetas])
    return ElementGeometry(dofs, d1_prev, d1_next, ref_twist, rest)

