"""
Energy Dissipation and Cooling Bounds

This module computes the dissipation functional Ψ_e, which drives the energy
balance dE/dt = -∬ f f Ψ_e(|u|²), its small- and large-speed constants, a
grid certificate of its shape and the solution of the upper-bound ODE
dE/dt = -Ψ_e(E).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.integrate import solve_ivp

from haffsim.core.errors import ConfigError, IntegrationError
from haffsim.core.kernels import AngularKernel, IsotropicKernel
from haffsim.core.quadrature import adaptive_panels
from haffsim.core.restitution import RestitutionLaw

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PsiProfile:
    """A restitution law together with the angular kernel and quadrature settings."""

    model: RestitutionLaw
    kernel: AngularKernel = field(default_factory=IsotropicKernel)
    quadrature_nodes: int = 16
    rtol: float = 1e-11


@dataclass
class HaffConstants:
    C_gamma: float
    C_b: float


@dataclass
class ShapeCertificate:
    increasing: bool
    convex: bool


def _kernel_breakpoints_in_z(kernel: AngularKernel) -> np.ndarray:
    # s = 1 - 2z² maps kinks of b(s) onto z in [0, 1]
    s = np.asarray(kernel.breakpoints, dtype=float)
    return np.sqrt(np.clip(0.5 * (1.0 - s), 0.0, 1.0))


def psi(profile: PsiProfile, x: ArrayLike) -> ArrayLike:
    """Evaluate Ψ_e at squared speed(s) ``x``.

    Uses Ψ_e(x) = 2π x^{3/2} ∫_0^1 (1 - e(√x z)²) b(1 - 2z²) z³ dz, which for
    the isotropic kernel is the reduced form (1/(2√x)) ∫_0^{√x} (1 - e(y)²) y³ dy.

    Raises:
        ValueError: If x is negative or non-finite.
        QuadratureError: If the quadrature does not settle.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(xs)) or np.any(xs < 0.0):
        raise ValueError("psi needs finite nonnegative x")
    roots = np.sqrt(xs)
    model, kernel = profile.model, profile.kernel

    def integrand(z: np.ndarray) -> np.ndarray:
        speeds = roots[:, None] * z[None, :]
        # 1 - e² = d(2 - d) with d = 1 - e
        d = np.asarray(model.deficit(speeds))
        return d * (2.0 - d) * (kernel(1.0 - 2.0 * z**2) * z**3)[None, :]

    integral = adaptive_panels(
        integrand,
        0.0,
        1.0,
        breakpoints=_kernel_breakpoints_in_z(kernel),
        order=profile.quadrature_nodes,
        rtol=profile.rtol,
    )
    values = 2.0 * math.pi * xs**1.5 * integral
    if np.ndim(x) == 0:
        return float(values[0])
    return values


def _z_moment(kernel: AngularKernel, power: float) -> float:
    """2π ∫_0^1 y^power b(1 - 2y²) dy."""
    value = adaptive_panels(
        lambda y: (y**power * kernel(1.0 - 2.0 * y**2))[None, :],
        0.0,
        1.0,
        breakpoints=_kernel_breakpoints_in_z(kernel),
    )
    return 2.0 * math.pi * float(value[0])


def gamma_constant(alpha: float, gamma: float, kernel: AngularKernel = None) -> float:
    """The constant 2πα ∫_0^1 y^{3+γ} b(1 - 2y²) dy (α/(2(4+γ)) for isotropic b)."""
    kernel = kernel or IsotropicKernel()
    return alpha * _z_moment(kernel, 3.0 + gamma)


def haff_constants(profile: PsiProfile) -> HaffConstants:
    """Small- and large-speed constants of Ψ_e.

    ``C_gamma`` is built from the quadratic deficit 1 - e² ≈ α_q r^γ, so that
    Ψ_e(x) ~ C_gamma x^{(3+γ)/2} as x → 0. ``C_b`` uses the large-speed limit
    e_infinity of the restitution law: Ψ_e(x) ~ C_b x^{3/2} as x → ∞.

    Raises:
        ConfigError: For the elastic law, where both constants vanish.
    """
    model = profile.model
    if model.is_elastic or model.deficit_coefficient <= 0.0:
        raise ConfigError("Haff constants are undefined for elastic collisions (e0 = 1)")
    c_gamma = gamma_constant(model.deficit_coefficient, model.gamma, profile.kernel)
    c_b = (1.0 - model.e_infinity**2) * _z_moment(profile.kernel, 3.0)
    return HaffConstants(C_gamma=c_gamma, C_b=c_b)


def certify_shape(profile: PsiProfile, x_max: float, n_grid: int = 64) -> ShapeCertificate:
    """Check on a uniform grid of [0, x_max] that Ψ_e is strictly increasing and convex."""
    if not x_max > 0.0:
        raise ValueError("x_max must be positive")
    if n_grid < 64:
        raise ValueError("n_grid must be at least 64")
    grid = np.linspace(0.0, x_max, n_grid + 1)
    values = psi(profile, grid)
    tolerance = 10.0 * profile.rtol * float(np.max(np.abs(values)))
    increasing = bool(np.all(np.diff(values) > 0.0))
    convex = bool(np.all(np.diff(values, 2) >= -tolerance))
    if not (increasing and convex):
        logger.warning("Psi shape check failed: increasing=%s convex=%s", increasing, convex)
    return ShapeCertificate(increasing=increasing, convex=convex)


def integrate_upper_bound(
    profile: PsiProfile,
    E0: float,
    t_grid: np.ndarray,
    rtol: float = 1e-9,
    atol: float = 1e-11,
) -> np.ndarray:
    """Solve dE/dt = -Ψ_e(E), E(0) = E0, and sample the solution on ``t_grid``.

    The ODE is integrated for u = log E with an embedded Runge-Kutta pair.

    Raises:
        ValueError: If E0 is not positive or the grid does not start at 0 ascending.
        IntegrationError: If the integrator gives up (step-size underflow).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if not E0 > 0.0:
        raise ValueError("E0 must be positive")
    if t_grid.ndim != 1 or t_grid.size == 0 or t_grid[0] != 0.0:
        raise ValueError("t_grid must be a 1-D grid starting at 0")
    if np.any(np.diff(t_grid) <= 0.0):
        raise ValueError("t_grid must be strictly ascending")
    if profile.model.is_elastic:
        return np.full_like(t_grid, E0)
    if t_grid.size == 1:
        return np.array([E0])

    def rhs(_t, u):
        energy = math.exp(u[0])
        return [-psi(profile, energy) / energy]

    solution = solve_ivp(
        rhs,
        (0.0, float(t_grid[-1])),
        [math.log(E0)],
        method="RK45",
        t_eval=t_grid,
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise IntegrationError(f"upper-bound ODE failed: {solution.message}")
    logger.debug("Upper-bound ODE: %d right-hand side evaluations", solution.nfev)
    return np.exp(solution.y[0])


def asymptotic_upper_bound(profile: PsiProfile, E0: float, t: ArrayLike) -> ArrayLike:
    """Closed-form solution of dE/dt = -C_gamma E^{(3+γ)/2}.

    Equals (E0^{-k} + k C_gamma t)^{-1/k} with k = (1 + γ)/2, the algebraic
    envelope with the shape (1 + t)^{-2/(1+γ)}.
    """
    constants = haff_constants(profile)
    k = 0.5 * (1.0 + profile.model.gamma)
    t = np.asarray(t, dtype=float)
    values = (E0 ** (-k) + k * constants.C_gamma * t) ** (-1.0 / k)
    if values.ndim == 0:
        return float(values)
    return values
