"""
Binary Collision Kinematics

Post-collisional velocities of inelastic hard spheres in the impact-direction
(n) and the σ parametrizations, and the kinetic energy each collision
dissipates. All functions accept single 3-vectors or batches of shape (n, 3).
"""

import logging
from dataclasses import dataclass

import numpy as np

from haffsim.core.restitution import RestitutionLaw

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-12


@dataclass
class CollisionOutcome:
    """Result of one (or a batch of) binary collision(s)."""

    v_prime: np.ndarray
    vbar_prime: np.ndarray
    impact_speed: np.ndarray
    e_used: np.ndarray
    energy_loss: np.ndarray


def _dot(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.einsum("...i,...i->...", x, y)


def _check_inputs(*vectors: np.ndarray) -> None:
    for vector in vectors:
        if vector.shape[-1] != 3:
            raise ValueError("velocities and directions must be 3-vectors")
        if not np.all(np.isfinite(vector)):
            raise ValueError("collision inputs must be finite")


def _check_unit(direction: np.ndarray, name: str) -> None:
    if np.any(np.abs(np.sqrt(_dot(direction, direction)) - 1.0) > UNIT_TOLERANCE):
        raise ValueError(f"{name} must be a unit vector")


def post_collision_sigma(
    v: np.ndarray, vbar: np.ndarray, sigma: np.ndarray, model: RestitutionLaw
) -> CollisionOutcome:
    """Collide in the σ parametrization.

    The impact speed is |u| sqrt((1 - û·σ)/2) and
    v' = v - β(u - |u|σ)/2, v̄' = v̄ + β(u - |u|σ)/2 with β = (1 + e)/2.
    Equal velocities give the identity outcome with zero loss.
    """
    v, vbar, sigma = (np.asarray(x, dtype=float) for x in (v, vbar, sigma))
    _check_inputs(v, vbar, sigma)
    _check_unit(sigma, "sigma")

    u = v - vbar
    speed = np.sqrt(_dot(u, u))
    # |u - |u|σ| = 2|u| sqrt((1 - û·σ)/2), without cancellation near σ = û
    deflection = u - speed[..., None] * sigma
    impact = 0.5 * np.sqrt(_dot(deflection, deflection))
    e = np.asarray(model.eval(impact), dtype=float)
    shift = (0.25 * (1.0 + e))[..., None] * deflection

    return CollisionOutcome(
        v_prime=v - shift,
        vbar_prime=vbar + shift,
        impact_speed=impact,
        e_used=e,
        energy_loss=0.5 * impact**2 * (1.0 - e**2),
    )


def post_collision_impact(
    v: np.ndarray, vbar: np.ndarray, n: np.ndarray, model: RestitutionLaw
) -> CollisionOutcome:
    """Collide along the impact direction ``n``: (u'·n) = -e (u·n)."""
    v, vbar, n = (np.asarray(x, dtype=float) for x in (v, vbar, n))
    _check_inputs(v, vbar, n)
    _check_unit(n, "n")

    u = v - vbar
    normal = _dot(u, n)
    impact = np.abs(normal)
    e = np.asarray(model.eval(impact), dtype=float)
    shift = (0.5 * (1.0 + e) * normal)[..., None] * n

    return CollisionOutcome(
        v_prime=v - shift,
        vbar_prime=vbar + shift,
        impact_speed=impact,
        e_used=e,
        energy_loss=0.5 * normal**2 * (1.0 - e**2),
    )


def energy_dissipation(
    v: np.ndarray, vbar: np.ndarray, sigma: np.ndarray, model: RestitutionLaw
) -> np.ndarray:
    """Kinetic energy lost, |u|²(1 - û·σ)/4 (1 - e²)."""
    outcome = post_collision_sigma(v, vbar, sigma, model)
    if np.ndim(outcome.energy_loss) == 0:
        return float(outcome.energy_loss)
    return outcome.energy_loss


def sigma_from_impact(u_hat: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Map an impact direction to σ = û - 2(û·n)n."""
    u_hat = np.asarray(u_hat, dtype=float)
    n = np.asarray(n, dtype=float)
    return u_hat - 2.0 * _dot(u_hat, n)[..., None] * n
