"""
Povzner Moment Estimates

This module computes the Povzner constants κ_p, their Hölder upper bound,
the lower-order moment sum S_p and the resulting differential bound on the
moments m_p = ∫ f |v|^{2p} dv.
"""

import logging
import math
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import minimize_scalar
from scipy.special import binom

from haffsim.core.errors import MissingMomentError
from haffsim.core.kernels import AngularKernel, IsotropicKernel

logger = logging.getLogger(__name__)

_S_NODES = 64
_PSI_NODES = 128
_THETA_SCAN = 256


def _order_key(p: float) -> float:
    return round(float(p), 12)


class MomentVector(Mapping):
    """
    Moments m_p indexed by real order p ≥ 0, normalized so that m_0 = 1.

    Lookups of absent orders raise :class:`MissingMomentError` unless
    ``allow_interpolation`` is set, in which case log m_p is interpolated
    linearly in p between the nearest stored orders.
    """

    def __init__(self, values: Dict[float, float], allow_interpolation: bool = False):
        stored = {}
        for order, value in values.items():
            if order < 0.0:
                raise ValueError(f"moment order must be nonnegative, got {order}")
            if not (math.isfinite(value) and value >= 0.0):
                raise ValueError(f"moment m_{order:g} must be finite and nonnegative")
            stored[_order_key(order)] = float(value)
        if 0.0 in stored and stored[0.0] != 1.0:
            raise ValueError("moments must be normalized with m_0 = 1")
        stored[0.0] = 1.0
        self._values = dict(sorted(stored.items()))
        self.allow_interpolation = allow_interpolation

    def __getitem__(self, order: float) -> float:
        key = _order_key(order)
        if key in self._values:
            return self._values[key]
        if self.allow_interpolation:
            return self._interpolate(key)
        raise MissingMomentError(order)

    def __iter__(self) -> Iterator[float]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        body = ", ".join(f"{p:g}: {m:.6g}" for p, m in self._values.items())
        return f"MomentVector({{{body}}})"

    @property
    def orders(self) -> List[float]:
        return list(self._values)

    def _interpolate(self, order: float) -> float:
        orders = np.array(self.orders)
        if order < orders[0] or order > orders[-1]:
            raise MissingMomentError(order)
        values = np.array([self._values[p] for p in orders])
        upper = int(np.searchsorted(orders, order))
        lower = upper - 1
        if values[lower] <= 0.0 or values[upper] <= 0.0:
            raise MissingMomentError(order)
        weight = (order - orders[lower]) / (orders[upper] - orders[lower])
        log_value = (1.0 - weight) * math.log(values[lower]) + weight * math.log(values[upper])
        return math.exp(log_value)

    def scaled(self, factor: float) -> "MomentVector":
        """Moments after multiplying every velocity by ``factor``."""
        return MomentVector(
            {p: m * factor ** (2.0 * p) for p, m in self._values.items()},
            allow_interpolation=self.allow_interpolation,
        )

    def jensen_chain_ok(self, rtol: float = 1e-12) -> bool:
        """Check m_{p+1/2} ≥ m_p^{1+1/(2p)} for every stored p ≥ 1 with p + 1/2 stored."""
        for order, value in self._values.items():
            upper = _order_key(order + 0.5)
            if order >= 1.0 and upper in self._values:
                if self._values[upper] < value ** (1.0 + 0.5 / order) * (1.0 - rtol):
                    return False
        return True

    def log_convex(self, rtol: float = 1e-12) -> bool:
        """Check log-convexity of p ↦ m_p on consecutive stored orders."""
        orders = [p for p, m in self._values.items() if m > 0.0]
        for left, middle, right in zip(orders, orders[1:], orders[2:]):
            weight = (middle - left) / (right - left)
            chord = (1.0 - weight) * math.log(self._values[left]) + weight * math.log(
                self._values[right]
            )
            if math.log(self._values[middle]) > chord + rtol * max(1.0, abs(chord)):
                return False
        return True


def kappa_closed_form(p: float) -> float:
    """κ_p for the isotropic kernel: (4/(p+1))(1 - (3/4)^{p+1} + (1/4)^{p+1})."""
    return 4.0 / (p + 1.0) * (1.0 - 0.75 ** (p + 1.0) + 0.25 ** (p + 1.0))


class _HalfSphereIntegral:
    """∫_0^1 ds ∫_0^{2π} dψ h_p(s) b̃(sinθ √(1-s²) cosψ + cosθ s) as a function of θ."""

    def __init__(self, p: float, kernel: AngularKernel):
        s_nodes, s_weights = leggauss(_S_NODES)
        self.s = 0.5 * (s_nodes + 1.0)
        self.s_weights = 0.5 * s_weights
        self.weight_p = ((3.0 + self.s) / 4.0) ** p + ((1.0 - self.s) / 4.0) ** p
        self.cos_psi = np.cos(2.0 * math.pi * np.arange(_PSI_NODES) / _PSI_NODES)
        self.kernel = kernel

    def __call__(self, theta: float) -> float:
        radial = math.sin(theta) * np.sqrt(1.0 - self.s**2)
        cosines = np.clip(
            radial[:, None] * self.cos_psi[None, :] + math.cos(theta) * self.s[:, None], -1.0, 1.0
        )
        # periodic trapezoid rule in ψ
        azimuthal = self.kernel.symmetrized(cosines).mean(axis=1) * 2.0 * math.pi
        return float(np.sum(self.s_weights * self.weight_p * azimuthal))


def _kappa_quadrature(p: float, kernel: AngularKernel) -> float:
    integral = _HalfSphereIntegral(p, kernel)
    thetas = np.linspace(0.0, math.pi, _THETA_SCAN)
    scan = np.array([integral(theta) for theta in thetas])
    best = int(np.argmax(scan))
    lower = thetas[max(best - 1, 0)]
    upper = thetas[min(best + 1, _THETA_SCAN - 1)]
    refined = minimize_scalar(
        lambda theta: -integral(theta),
        bounds=(lower, upper),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return max(float(scan[best]), float(-refined.fun))


def kappa_p(p: float, kernel: Optional[AngularKernel] = None, method: str = "auto") -> float:
    """Povzner constant κ_p.

    Args:
        p: Moment order, at least 1.
        kernel: Angular kernel; isotropic when omitted.
        method: ``"auto"`` (closed form for the isotropic kernel), ``"closed"``
            or ``"quadrature"`` (the sup over the angle between Û and û).

    Raises:
        ValueError: If p < 1, or the closed form is requested for a non-isotropic kernel.
    """
    if not p >= 1.0:
        raise ValueError(f"kappa_p needs p >= 1, got {p}")
    kernel = kernel or IsotropicKernel()
    if method == "quadrature":
        return _kappa_quadrature(p, kernel)
    if method == "closed" and not kernel.is_isotropic:
        raise ValueError("the closed form of kappa_p holds for the isotropic kernel only")
    if method not in ("auto", "closed"):
        raise ValueError(f"unknown kappa_p method '{method}'")
    if kernel.is_isotropic:
        return kappa_closed_form(p)
    return _kappa_quadrature(p, kernel)


def kappa_bound(p: float, q: float, b_norm: float) -> float:
    """Hölder bound 16π ‖b‖_{L^q} / (q'p + 1)^{1/q'} with 1/q + 1/q' = 1."""
    if not q >= 1.0:
        raise ValueError("q must be at least 1")
    if not p >= 1.0:
        raise ValueError("p must be at least 1")
    if q == 1.0:
        return 16.0 * math.pi * b_norm
    q_conj = 1.0 if math.isinf(q) else q / (q - 1.0)
    return 16.0 * math.pi * b_norm / (q_conj * p + 1.0) ** (1.0 / q_conj)


@dataclass
class KappaRow:
    p: float
    kappa: float
    bound: float


def kappa_table(
    p_list: Iterable[float], kernel: Optional[AngularKernel] = None, q: float = math.inf
) -> List[KappaRow]:
    """Rows (p, κ_p, Hölder bound) for the given orders."""
    kernel = kernel or IsotropicKernel()
    b_norm = kernel.lq_norm(q)
    return [KappaRow(p, kappa_p(p, kernel), kappa_bound(p, q, b_norm)) for p in p_list]


def s_p(moments: MomentVector, p: float) -> float:
    """S_p = Σ_{k=1}^{⌊(p+1)/2⌋} binom(p, k)(m_{k+1/2} m_{p-k} + m_k m_{p-k+1/2})."""
    if not p >= 1.0:
        raise ValueError(f"s_p needs p >= 1, got {p}")
    total = 0.0
    for k in range(1, int(math.floor((p + 1.0) / 2.0)) + 1):
        total += float(binom(p, k)) * (
            moments[k + 0.5] * moments[p - k] + moments[k] * moments[p - k + 0.5]
        )
    return total


def moment_rhs(
    moments: MomentVector, p: float, kernel: Optional[AngularKernel] = None
) -> float:
    """Upper bound -(1 - κ_p) m_{p+1/2} + κ_p S_p on the production of m_p."""
    kappa = kappa_p(p, kernel)
    return -(1.0 - kappa) * moments[p + 0.5] + kappa * s_p(moments, p)
