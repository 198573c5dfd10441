"""
Energy Models Module
Constitutive laws of the ribbon as functions of element strains

Every model works on a batch of n elements. Strains are rows
[eps, kappa1, kappa2, tau] in the integrated convention; the models carry
the 1/Delta-l factors. Outputs are exact gradients and Hessians in strain
space.
"""

from dataclasses import dataclass
from math import factorial
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial

from .errors import ConfigurationError, DivisionGuard, GeneratorOverrun
from .kinematics import ElementStrain

MODEL_IDS = ('kirchhoff', 'sadowsky', 'sano', 'audoly', 'wunderlich')

PHI_ZERO = 1.0 / 360.0
PHI_SERIES_LIMIT = 20.0
LOG_SERIES_LIMIT = 1.0

# phi(v) = A(x) / B(x) with x = v^2 / 4
_PHI_NUMERATOR = np.array([4.0 * (j + 1) / factorial(4 * j + 6) for j in range(16)])
_PHI_DENOMINATOR = np.array([2.0 / factorial(4 * k + 1) for k in range(16)])

# log((1 + y/2) / (1 - y/2)) / y as a series in z = y / 2
_LOG_FACTOR = np.zeros(81)
_LOG_FACTOR[0::2] = 1.0 / (2.0 * np.arange(41) + 1.0)


@dataclass(frozen=True)
class MaterialParams:
    """Linear elastic, homogeneous material"""

    youngs_modulus: float = 10e9
    poisson_ratio: float = 0.5
    shear_modulus: float = None
    density: float = 1000.0

    def __post_init__(self):
        if self.shear_modulus is None:
            object.__setattr__(self, 'shear_modulus',
                               self.youngs_modulus / (2.0 * (1.0 + self.poisson_ratio)))
        errors = []
        if not self.youngs_modulus > 0:
            errors.append("youngs_modulus must be positive")
        if not self.shear_modulus > 0:
            errors.append("shear_modulus must be positive")
        if not -1.0 < self.poisson_ratio <= 0.5:
            errors.append("poisson_ratio must lie in (-1, 0.5]")
        if not self.density > 0:
            errors.append("density must be positive")
        if errors:
            raise ConfigurationError("Invalid material: " + "; ".join(errors))


@dataclass(frozen=True)
class CrossSection:
    """
    Rectangular cross-section W x b and the quantities derived from it.

    ``inplane_ratio`` pins the in-plane bending inertia to a fixed multiple
    of the out-of-plane one. Every stiffness then scales linearly with W, so
    a width-free energy model gives width-free normalized results. Left as
    None, I1 is the geometric b W^3 / 12.
    """

    width: float
    thickness: float
    poisson_ratio: float = 0.5
    inplane_ratio: Optional[float] = None

    def __post_init__(self):
        if not self.width > self.thickness > 0:
            raise ConfigurationError(
                f"cross-section needs width > thickness > 0, got W={self.width}, b={self.thickness}")
        if self.inplane_ratio is not None and not self.inplane_ratio >= 1.0:
            raise ConfigurationError(f"inplane_ratio must be at least 1, got {self.inplane_ratio}")

    @property
    def area(self):
        return self.width * self.thickness

    @property
    def inertia_1(self):
        if self.inplane_ratio is not None:
            return self.inplane_ratio * self.inertia_2
        return self.thickness * self.width ** 3 / 12.0

    @property
    def inertia_2(self):
        return self.width * self.thickness ** 3 / 12.0

    @property
    def torsion_constant(self):
        return self.width * self.thickness ** 3 / 3.0

    @property
    def sano_zeta_sq(self):
        return (1.0 - self.poisson_ratio) * self.width ** 4 / (60.0 * self.thickness ** 2)

    @property
    def audoly_kappa_star(self):
        return self.thickness / (np.sqrt(12.0 * (1.0 - self.poisson_ratio ** 2)) * self.width ** 2)


@dataclass
class ModelOptions:
    sadowsky_eps: float = 1e-8
    kappa_guard: float = 1e-10
    overrun_guard: float = 1e-6


@dataclass
class StrainSpaceDerivatives:
    """
    Energy and strain-space derivatives of a batch of elements.

    Attributes:
        energy (np.ndarray): (n,) element energies (J)
        grad (np.ndarray): (n, 4) dE_k / d eps_k
        hess (np.ndarray): (n, 4, 4) d2E_k / d eps_k^2
        grad_prev (np.ndarray): (n, 4) dE_k / d eps_{k-1} (Wunderlich only)
        grad_next (np.ndarray): (n, 4) dE_k / d eps_{k+1} (Wunderlich only)
    """

    energy: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    grad_prev: np.ndarray = None
    grad_next: np.ndarray = None

    @property
    def total_energy(self):
        return float(np.sum(self.energy))

    def effective_grad(self):
        """Total derivative of the energy with respect to each element's strains"""
        grad = self.grad.copy()
        if self.grad_prev is not None:
            grad[:-1] += self.grad_prev[1:]
        if self.grad_next is not None:
            grad[1:] += self.grad_next[:-1]
        return grad


def _as_rows(strains):
    if isinstance(strains, ElementStrain):
        return strains.as_array()
    return np.asarray(strains, dtype=float).reshape(-1, 4)


def _deviations(strains, natural):
    delta = _as_rows(strains).copy()
    delta[:, 1:] -= np.asarray(natural, dtype=float).reshape(-1, 3)
    return delta


def _quadratic_terms(delta, rest, section, material, active=(True, True, True, True)):
    stiffness = np.column_stack([
        material.youngs_modulus * section.area * rest.element_edge_lengths,
        material.youngs_modulus * section.inertia_1 / rest.voronoi_lengths,
        material.youngs_modulus * section.inertia_2 / rest.voronoi_lengths,
        material.shear_modulus * section.torsion_constant / rest.voronoi_lengths,
    ]) * np.asarray(active, dtype=float)
    n = delta.shape[0]
    hess = np.zeros((n, 4, 4))
    hess[:, np.arange(4), np.arange(4)] = stiffness
    return StrainSpaceDerivatives(0.5 * np.sum(stiffness * delta ** 2, axis=1), stiffness * delta, hess)


def _add_quartic_ratio(out, u, w, coeff, shift):
    """Add coeff * w^4 / (u^2 + shift) into the (kappa2, tau) slots"""
    denom = u ** 2 + shift
    w2 = w ** 2
    out.energy += coeff * w2 ** 2 / denom
    out.grad[:, 2] += -2.0 * coeff * w2 ** 2 * u / denom ** 2
    out.grad[:, 3] += 4.0 * coeff * w2 * w / denom
    h_uu = 2.0 * coeff * w2 ** 2 * (3.0 * u ** 2 - shift) / denom ** 3
    h_uw = -8.0 * coeff * w2 * w * u / denom ** 2
    h_ww = 12.0 * coeff * w2 / denom
    out.hess[:, 2, 2] += h_uu
    out.hess[:, 2, 3] += h_uw
    out.hess[:, 3, 2] += h_uw
    out.hess[:, 3, 3] += h_ww
    return out


def kirchhoff_energy(strains, natural, rest, section, material, options=None):
    """
    Quadratic stretching, bending and twisting energy.

    Args:
        strains (ElementStrain or np.ndarray): (n, 4) element strains
        natural (np.ndarray): (n, 3) natural [kappa1, kappa2, tau]
        rest (RestConfiguration): Supplies rest edge and Voronoi lengths
        section (CrossSection): Cross-section
        material (MaterialParams): Material
        options (ModelOptions): Unused

    Returns:
        StrainSpaceDerivatives: Diagonal Hessian
    """
    return _quadratic_terms(_deviations(strains, natural), rest, section, material)


def sadowsky_energy(strains, natural, rest, section, material, options=None):
    """Kirchhoff plus the regularized developable coupling tau^4 / (kappa2^2 + eps)"""
    options = options or ModelOptions()
    delta = _deviations(strains, natural)
    out = _quadratic_terms(delta, rest, section, material)
    coeff = 0.5 * material.youngs_modulus * section.inertia_2 / rest.voronoi_lengths
    return _add_quartic_ratio(out, delta[:, 2], delta[:, 3], coeff, options.sadowsky_eps)


def sano_energy(strains, natural, rest, section, material, options=None):
    """Kirchhoff plus the width-regularized coupling tau^4 / ((dl/zeta)^2 + kappa2^2)"""
    delta = _deviations(strains, natural)
    out = _quadratic_terms(delta, rest, section, material)
    dl = rest.voronoi_lengths
    coeff = 0.5 * material.youngs_modulus * section.inertia_2 / dl
    return _add_quartic_ratio(out, delta[:, 2], delta[:, 3], coeff, dl ** 2 / section.sano_zeta_sq)


def _phi_series(v):
    x = 0.25 * v ** 2
    num = polynomial.polyval(x, _PHI_NUMERATOR)
    num_1 = polynomial.polyval(x, polynomial.polyder(_PHI_NUMERATOR))
    num_2 = polynomial.polyval(x, polynomial.polyder(_PHI_NUMERATOR, 2))
    den = polynomial.polyval(x, _PHI_DENOMINATOR)
    den_1 = polynomial.polyval(x, polynomial.polyder(_PHI_DENOMINATOR))
    den_2 = polynomial.polyval(x, polynomial.polyder(_PHI_DENOMINATOR, 2))
    phi = num / den
    phi_x = (num_1 * den - num * den_1) / den ** 2
    phi_xx = (num_2 * den - num * den_2) / den ** 2 - 2.0 * den_1 * (num_1 * den - num * den_1) / den ** 3
    return phi, 0.5 * v * phi_x, 0.25 * v ** 2 * phi_xx + 0.5 * phi_x


def _phi_closed_form(v):
    """phi and its v-derivatives for v > 0, hyperbolics scaled by sech(s)"""
    s = np.sqrt(0.5 * v)
    sech = 2.0 * np.exp(-s) / (1.0 + np.exp(-2.0 * s))
    tanh = np.tanh(s)
    cos_s = np.cos(s) * sech
    sin_s = np.sin(s) * sech

    num, num_1, num_2 = 1.0 - cos_s, tanh + sin_s, 1.0 + cos_s
    den = s * (tanh + sin_s)
    den_1 = (tanh + sin_s) + s * (1.0 + cos_s)
    den_2 = 2.0 * (1.0 + cos_s) + s * (tanh - sin_s)

    g = num / den
    g_1 = (num_1 * den - num * den_1) / den ** 2
    g_2 = (num_2 * den - num * den_2) / den ** 2 - 2.0 * den_1 * (num_1 * den - num * den_1) / den ** 3

    s_1 = 1.0 / (4.0 * s)
    s_2 = -1.0 / (16.0 * s ** 3)
    h = 0.5 - g
    h_1 = -g_1 * s_1
    h_2 = -(g_2 * s_1 ** 2 + g_1 * s_2)
    phi = 4.0 * h / v ** 2
    phi_1 = 4.0 * h_1 / v ** 2 - 8.0 * h / v ** 3
    phi_2 = 4.0 * h_2 / v ** 2 - 16.0 * h_1 / v ** 3 + 24.0 * h / v ** 4
    return phi, phi_1, phi_2


def audoly_phi_derivatives(v):
    """
    Transition function phi(v) and its first two derivatives.

    The power-series branch has only positive terms, so it is free of the
    cancellation that the closed form suffers near v = 0.

    Args:
        v (float or np.ndarray): Dimensionless curvature parameter

    Returns:
        tuple: (phi, dphi/dv, d2phi/dv2) with the shape of ``v``
    """
    v = np.asarray(v, dtype=float)
    magnitude = np.abs(v)
    phi = np.empty_like(magnitude)
    phi_1 = np.empty_like(magnitude)
    phi_2 = np.empty_like(magnitude)

    near = magnitude < PHI_SERIES_LIMIT
    phi[near], phi_1[near], phi_2[near] = _phi_series(magnitude[near])
    far = ~near
    if np.any(far):
        phi[far], phi_1[far], phi_2[far] = _phi_closed_form(magnitude[far])
    return phi, np.sign(v) * phi_1, phi_2


def audoly_phi(v):
    """Audoly transition function phi(v), even in v, phi(0) = 1/360"""
    return audoly_phi_derivatives(v)[0]


def audoly_energy(strains, natural, rest, section, material, options=None):
    """Kirchhoff plus the finite-width correction weighted by phi(v)"""
    delta = _deviations(strains, natural)
    out = _quadratic_terms(delta, rest, section, material)
    u, w = delta[:, 2], delta[:, 3]
    nu = section.poisson_ratio
    width, thick = section.width, section.thickness
    dl = rest.voronoi_lengths

    k = 3.0 * material.youngs_modulus * section.inertia_2 * width ** 4 / (thick ** 2 * dl ** 3)
    c_v = np.sqrt(12.0 * (1.0 - nu ** 2)) * width ** 2 / (thick * dl)
    phi, phi_1, phi_2 = audoly_phi_derivatives(c_v * u)
    q = nu * u ** 2 + w ** 2

    out.energy += k * q ** 2 * phi
    out.grad[:, 2] += k * (4.0 * nu * u * q * phi + q ** 2 * c_v * phi_1)
    out.grad[:, 3] += 4.0 * k * q * w * phi
    h_uu = k * (4.0 * nu * q * phi + 8.0 * nu ** 2 * u ** 2 * phi
                + 8.0 * nu * u * q * c_v * phi_1 + q ** 2 * c_v ** 2 * phi_2)
    h_uw = k * (8.0 * nu * u * w * phi + 4.0 * q * w * c_v * phi_1)
    h_ww = k * (4.0 * q * phi + 8.0 * w ** 2 * phi)
    out.hess[:, 2, 2] += h_uu
    out.hess[:, 2, 3] += h_uw
    out.hess[:, 3, 2] += h_uw
    out.hess[:, 3, 3] += h_ww
    return out


def wunderlich_log_factor(y):
    """
    log((1 + y/2) / (1 - y/2)) / y and its first two derivatives.

    Returns:
        tuple: (L, dL/dy, d2L/dy2)
    """
    y = np.asarray(y, dtype=float)
    value = np.empty_like(y)
    first = np.empty_like(y)
    second = np.empty_like(y)

    near = np.abs(y) < LOG_SERIES_LIMIT
    z = 0.5 * y[near]
    value[near] = polynomial.polyval(z, _LOG_FACTOR)
    first[near] = 0.5 * polynomial.polyval(z, polynomial.polyder(_LOG_FACTOR))
    second[near] = 0.25 * polynomial.polyval(z, polynomial.polyder(_LOG_FACTOR, 2))

    far = ~near
    yf = y[far]
    z = 0.5 * yf
    atanh = np.arctanh(z)
    a_1 = 0.5 / (1.0 - z ** 2)
    a_2 = 0.5 * z / (1.0 - z ** 2) ** 2
    value[far] = 2.0 * atanh / yf
    first[far] = 2.0 * a_1 / yf - 2.0 * atanh / yf ** 2
    second[far] = 2.0 * a_2 / yf - 4.0 * a_1 / yf ** 2 + 4.0 * atanh / yf ** 3
    return value, first, second


def wunderlich_energy(strains, natural, rest, section, material, options=None):
    """
    Stretching, in-plane bending and the Wunderlich bending-twisting term.

    eta = tau / kappa2 is differentiated along the rod with a central
    difference over the neighbors (one-sided at both ends), so each element
    also reports gradients with respect to its neighbors' strains.

    Raises:
        DivisionGuard: If an element is twisted where kappa2 vanishes
        GeneratorOverrun: If |W eta'| reaches 2
    """
    options = options or ModelOptions()
    delta = _deviations(strains, natural)
    out = _quadratic_terms(delta, rest, section, material, active=(True, True, False, False))
    n = delta.shape[0]
    u, w = delta[:, 2], delta[:, 3]
    dl = rest.voronoi_lengths
    a = 0.5 * material.youngs_modulus * section.inertia_2 / dl

    flat = np.abs(u) < options.kappa_guard
    untwisted = flat & (np.abs(w) < options.kappa_guard)
    if np.any(flat & ~untwisted):
        index = int(np.flatnonzero(flat & ~untwisted)[0])
        raise DivisionGuard(f"element {index}: twist {w[index]:.3e} at vanishing curvature",
                            element=index)

    u_m = np.concatenate([u[:1], u[:-1]])
    w_m = np.concatenate([w[:1], w[:-1]])
    u_p = np.concatenate([u[1:], u[-1:]])
    w_p = np.concatenate([w[1:], w[-1:]])
    first = np.zeros(n, dtype=bool)
    last = np.zeros(n, dtype=bool)
    first[0] = True
    last[-1] = True

    # eta' ~ (dl/2) D / u^2 with D = (dw) u - w (du), the quotient rule for (w/u)';
    # one-sided differences doubled to keep the same step
    d_val = (w_p - w_m) * u - w * (u_p - u_m)
    d_u = w_p - w_m + np.where(first, w, 0.0) - np.where(last, w, 0.0)
    d_w = -(u_p - u_m) - np.where(first, u, 0.0) + np.where(last, u, 0.0)
    d_um = np.where(first, 0.0, w)
    d_wm = np.where(first, 0.0, -u)
    d_up = np.where(last, 0.0, -w)
    d_wp = np.where(last, 0.0, u)
    scale = np.where(first | last, 2.0, 1.0) if n > 1 else np.zeros(n)
    c = section.width * 0.5 * dl * scale
    c = np.where(untwisted, 0.0, c)

    us = np.where(untwisted, 1.0, u)
    y = c * d_val / us ** 2
    overrun = np.abs(y) >= 2.0 - options.overrun_guard
    if np.any(overrun):
        index = int(np.flatnonzero(overrun)[0])
        raise GeneratorOverrun(f"element {index}: |W eta'| = {abs(y[index]):.6f} reached 2",
                               element=index)
    y_u = c * (d_u / us ** 2 - 2.0 * d_val / us ** 3)
    y_w = c * d_w / us ** 2
    y_uu = c * (-4.0 * d_u / us ** 3 + 6.0 * d_val / us ** 4)
    y_uw = -2.0 * c * d_w / us ** 3

    s = u ** 2 + w ** 2
    p = s ** 2 / us ** 2
    p_u = 4.0 * s / us - 2.0 * s ** 2 / us ** 3
    p_w = 4.0 * s * w / us ** 2
    p_uu = 8.0 - 12.0 * s / us ** 2 + 6.0 * s ** 2 / us ** 4
    p_uw = 8.0 * w / us - 8.0 * s * w / us ** 3
    p_ww = (8.0 * w ** 2 + 4.0 * s) / us ** 2
    # the w^4/u^2 part drops out in the untwisted limit
    p = np.where(untwisted, u ** 2 + 2.0 * w ** 2, p)
    p_u = np.where(untwisted, 2.0 * u, p_u)
    p_w = np.where(untwisted, 4.0 * w, p_w)
    p_uu = np.where(untwisted, 2.0, p_uu)
    p_uw = np.where(untwisted, 0.0, p_uw)
    p_ww = np.where(untwisted, 4.0, p_ww)

    lf, lf_1, lf_2 = wunderlich_log_factor(y)

    out.energy += a * p * lf
    out.grad[:, 2] += a * (p_u * lf + p * lf_1 * y_u)
    out.grad[:, 3] += a * (p_w * lf + p * lf_1 * y_w)
    h_uu = a * (p_uu * lf + 2.0 * p_u * lf_1 * y_u + p * lf_2 * y_u ** 2 + p * lf_1 * y_uu)
    h_uw = a * (p_uw * lf + p_u * lf_1 * y_w + p_w * lf_1 * y_u + p * lf_2 * y_u * y_w + p * lf_1 * y_uw)
    h_ww = a * (p_ww * lf + 2.0 * p_w * lf_1 * y_w + p * lf_2 * y_w ** 2)
    out.hess[:, 2, 2] += h_uu
    out.hess[:, 2, 3] += h_uw
    out.hess[:, 3, 2] += h_uw
    out.hess[:, 3, 3] += h_ww

    neighbor = a * p * lf_1 * c / us ** 2
    out.grad_prev = np.zeros((n, 4))
    out.grad_next = np.zeros((n, 4))
    out.grad_prev[:, 2] = neighbor * d_um
    out.grad_prev[:, 3] = neighbor * d_wm
    out.grad_next[:, 2] = neighbor * d_up
    out.grad_next[:, 3] = neighbor * d_wp
    return out


ENERGY_MODELS = {
    'kirchhoff': kirchhoff_energy,
    'sadowsky': sadowsky_energy,
    'sano': sano_energy,
    'audoly': audoly_energy,
    'wunderlich': wunderlich_energy,
}


def evaluate_model(model_id, strains, natural, rest, section, material, options=None):
    """
    Dispatch to one of the five energy models by identifier.

    Raises:
        ConfigurationError: If ``model_id`` is unknown
    """
    try:
        model = ENERGY_MODELS[model_id]
    except KeyError:
        raise ConfigurationError(f"unknown energy model {model_id!r}; expected one of {', '.join(MODEL_IDS)}")
    return model(strains, natural, rest, section, material, options)
