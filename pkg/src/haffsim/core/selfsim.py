"""
Self-Similar Variables

Scaling functions between physical time t and rescaled time τ, the drift
coefficient ξ(τ), the rescaled restitution coefficient ẽ_τ and the map between
physical and self-similar ensembles. The normalization τ'(t) V(t) = 1 fixes
λ(τ) ≡ 1.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from haffsim.core.ensemble import SimMode, VelocityEnsemble
from haffsim.core.errors import ConfigError
from haffsim.core.restitution import ArrayLike, RestitutionLaw

logger = logging.getLogger(__name__)

GAMMA_ZERO = 1e-8


def _scalar_or_array(values: np.ndarray, like) -> Union[float, np.ndarray]:
    return float(values) if np.ndim(like) == 0 else values


@dataclass(frozen=True)
class ScalingParams:
    """The base restitution law and its small-impact exponent γ."""

    model: RestitutionLaw
    gamma: Optional[float] = None

    def __post_init__(self):
        derived = self.model.gamma
        if self.gamma is None:
            object.__setattr__(self, "gamma", derived)
        elif abs(self.gamma - derived) > 1e-12:
            raise ConfigError(f"gamma={self.gamma} does not match the model's gamma={derived}")

    @property
    def logarithmic(self) -> bool:
        return self.gamma < GAMMA_ZERO


def velocity_scale(params: ScalingParams, t: ArrayLike) -> ArrayLike:
    """V(t) = (1 + t)^{1/(1+γ)}."""
    t_arr = np.asarray(t, dtype=float)
    return _scalar_or_array(np.exp(np.log1p(t_arr) / (1.0 + params.gamma)), t)


V = velocity_scale


def tau_of_t(params: ScalingParams, t: ArrayLike) -> ArrayLike:
    """τ(t) = ((1+γ)/γ)((1+t)^{γ/(1+γ)} - 1), or log(1+t) when γ = 0."""
    t_arr = np.asarray(t, dtype=float)
    gamma = params.gamma
    if params.logarithmic:
        values = np.log1p(t_arr)
    else:
        values = (1.0 + gamma) / gamma * np.expm1(gamma / (1.0 + gamma) * np.log1p(t_arr))
    return _scalar_or_array(values, t)


def zeta(params: ScalingParams, tau: ArrayLike) -> ArrayLike:
    """Inverse of :func:`tau_of_t`."""
    tau_arr = np.asarray(tau, dtype=float)
    gamma = params.gamma
    if params.logarithmic:
        values = np.expm1(tau_arr)
    else:
        values = np.expm1((1.0 + gamma) / gamma * np.log1p(gamma * tau_arr / (1.0 + gamma)))
    return _scalar_or_array(values, tau)


def xi(params: ScalingParams, tau: ArrayLike) -> ArrayLike:
    """ξ(τ) = 1/(γτ + 1 + γ); identically 1 when γ = 0."""
    tau_arr = np.asarray(tau, dtype=float)
    if params.logarithmic:
        return _scalar_or_array(np.ones_like(tau_arr), tau)
    return _scalar_or_array(1.0 / (params.gamma * tau_arr + 1.0 + params.gamma), tau)


def lambda_(params: ScalingParams, tau: ArrayLike) -> ArrayLike:
    """λ(τ), fixed to 1 by the choice of time scaling."""
    return _scalar_or_array(np.ones_like(np.asarray(tau, dtype=float)), tau)


def drift_factor(params: ScalingParams, tau: float, dtau: float) -> float:
    """exp(∫_τ^{τ+Δτ} ξ), the exact multiplier of the drift sub-step."""
    if params.logarithmic:
        return math.exp(dtau)
    gamma = params.gamma
    ratio = (gamma * (tau + dtau) + 1.0 + gamma) / (gamma * tau + 1.0 + gamma)
    return ratio ** (1.0 / gamma)


class RescaledRestitution(RestitutionLaw):
    """ẽ_τ(r) = e(r / V(ζ(τ))), with the scale frozen at construction."""

    def __init__(self, base: RestitutionLaw, scale: float, tau: float):
        self.base = base
        self.scale = scale
        self.tau = tau
        self._inverse = 1.0 / scale

    def eval(self, r: ArrayLike) -> ArrayLike:
        return self.base.eval(np.asarray(r, dtype=float) * self._inverse)

    def deficit(self, r: ArrayLike) -> ArrayLike:
        return self.base.deficit(np.asarray(r, dtype=float) * self._inverse)

    @property
    def gamma(self) -> float:
        return self.base.gamma

    @property
    def alpha(self) -> float:
        return self.base.alpha * self._inverse**self.base.gamma

    @property
    def deficit_coefficient(self) -> float:
        return self.base.deficit_coefficient * self._inverse**self.base.gamma

    @property
    def e_infinity(self) -> float:
        return self.base.e_infinity

    @property
    def is_elastic(self) -> bool:
        return self.base.is_elastic

    def __repr__(self) -> str:
        return f"RescaledRestitution(base={self.base!r}, tau={self.tau:g}, scale={self.scale:.6g})"


def rescaled_restitution(params: ScalingParams, tau: float) -> RescaledRestitution:
    """The coefficient seen in rescaled variables at time τ."""
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    scale = velocity_scale(params, zeta(params, tau))
    return RescaledRestitution(params.model, scale, tau)


def rescale_ensemble(ensemble: VelocityEnsemble, params: ScalingParams) -> VelocityEnsemble:
    """Map an ensemble into the other frame, w = V(t) v, τ = τ(t), and back.

    The generator is handed over to the returned ensemble.
    """
    if ensemble.mode is SimMode.PHYSICAL:
        scale = velocity_scale(params, ensemble.t)
        return replace(
            ensemble,
            velocities=ensemble.velocities * scale,
            tau=tau_of_t(params, ensemble.t),
            mode=SimMode.SELF_SIMILAR,
        )
    t = zeta(params, ensemble.tau)
    scale = velocity_scale(params, t)
    return replace(
        ensemble,
        velocities=ensemble.velocities / scale,
        t=t,
        mode=SimMode.PHYSICAL,
    )
