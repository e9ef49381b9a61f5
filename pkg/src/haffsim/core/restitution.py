"""
Restitution Coefficients

This module provides the catalog of impact-velocity dependent restitution
coefficients (constant, monotone decreasing, viscoelastic), the solver for the
viscoelastic implicit law and a grid-based checker for the structural
assumptions the cooling theory relies on.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

import numpy as np

from haffsim.core.errors import ConfigError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# 2**-47 < 1e-14: bracket width reached by a fixed number of halvings
_BISECTION_STEPS = 47


class RestitutionKind(str, Enum):
    """Enum of the supported restitution laws."""

    CONSTANT = "constant"
    MONOTONE = "monotone"
    VISCOELASTIC = "viscoelastic"


def _as_speeds(r: ArrayLike) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("impact speed must be finite")
    if np.any(arr < 0.0):
        raise ValueError("impact speed must be nonnegative")
    return arr


def _like_input(values: np.ndarray, r: ArrayLike) -> ArrayLike:
    if np.ndim(r) == 0:
        return float(values)
    return values


def solve_viscoelastic(a: float, r: ArrayLike) -> np.ndarray:
    """Solve e + a r^(1/5) e^(3/5) = 1 for e.

    With y = e^(1/5) the equation reads y^5 + s y^3 = 1 (s = a r^(1/5)), whose
    left side is strictly increasing on [0, 1]. The root is bracketed by
    bisection and polished with one Newton step.

    Args:
        a: Positive material constant.
        r: Nonnegative impact speed(s).

    Returns:
        Array of restitution values in (0, 1].
    """
    r = np.asarray(r, dtype=float)
    s = a * np.power(r, 0.2)
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    for _ in range(_BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        above = mid**5 + s * mid**3 > 1.0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    y = 0.5 * (lo + hi)
    residual = y**5 + s * y**3 - 1.0
    slope = 5.0 * y**4 + 3.0 * s * y**2
    y = y - residual / slope
    return np.where(s == 0.0, 1.0, y**5)


class RestitutionLaw(ABC):
    """
    Abstract base for anything that maps an impact speed to e(r).

    Concrete laws expose the small-impact exponent ``gamma``, the coefficient
    ``alpha`` of 1 - e(r) ~ alpha r^gamma, the coefficient of the quadratic
    deficit 1 - e(r)^2 ~ deficit_coefficient r^gamma and the large-speed
    limit ``e_infinity``.
    """

    @abstractmethod
    def eval(self, r: ArrayLike) -> ArrayLike:
        """Evaluate the restitution coefficient at impact speed ``r``."""

    def deficit(self, r: ArrayLike) -> ArrayLike:
        """Return 1 - e(r)."""
        values = 1.0 - np.asarray(self.eval(r), dtype=float)
        return _like_input(values, r)

    @property
    @abstractmethod
    def gamma(self) -> float:
        """Small-impact exponent."""

    @property
    @abstractmethod
    def alpha(self) -> float:
        """Small-impact coefficient of 1 - e."""

    @property
    @abstractmethod
    def deficit_coefficient(self) -> float:
        """Small-impact coefficient of 1 - e^2."""

    @property
    @abstractmethod
    def e_infinity(self) -> float:
        """liminf of e(r) as r grows."""

    @property
    def is_elastic(self) -> bool:
        return False

    def beta(self, r: ArrayLike) -> ArrayLike:
        """Return (1 + e(r)) / 2."""
        return 0.5 * (1.0 + self.eval(r))

    def vartheta(self, r: ArrayLike) -> ArrayLike:
        """Return r * e(r), the post-collisional normal speed."""
        speeds = _as_speeds(r)
        return _like_input(speeds * np.asarray(self.eval(speeds)), r)

    def jacobian(self, r: ArrayLike) -> ArrayLike:
        """Return dϑ/dr by centred finite differences (one-sided at r = 0)."""
        speeds = _as_speeds(r)
        h = 1e-6 * np.maximum(speeds, 1e-6)
        lower = np.maximum(speeds - h, 0.0)
        upper = speeds + h
        values = (np.asarray(self.vartheta(upper)) - np.asarray(self.vartheta(lower))) / (
            upper - lower
        )
        return _like_input(values, r)


@dataclass(frozen=True)
class RestitutionModel(RestitutionLaw):
    """
    One of the three catalogued restitution laws.

    Attributes:
        kind: Which law.
        e0: Constant value (constant kind).
        a: Material constant (monotone and viscoelastic kinds).
        eta: Exponent of the monotone law.
        limiting: Allows the sticky limit e0 = 0, used only for kinematic checks.
    """

    kind: RestitutionKind
    e0: float = 1.0
    a: float = 0.0
    eta: float = 1.0
    limiting: bool = field(default=False, repr=False)

    def __post_init__(self):
        kind = RestitutionKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is RestitutionKind.CONSTANT:
            lower_ok = self.e0 >= 0.0 if self.limiting else self.e0 > 0.0
            if not (math.isfinite(self.e0) and lower_ok and self.e0 <= 1.0):
                raise ConfigError(f"restitution.e0 must lie in (0, 1], got {self.e0}")
            return
        if not (math.isfinite(self.a) and self.a > 0.0):
            raise ConfigError(f"restitution.a must be positive, got {self.a}")
        if kind is RestitutionKind.MONOTONE and not (math.isfinite(self.eta) and self.eta > 0.0):
            raise ConfigError(f"restitution.eta must be positive, got {self.eta}")

    @classmethod
    def constant(cls, e0: float) -> "RestitutionModel":
        return cls(kind=RestitutionKind.CONSTANT, e0=e0)

    @classmethod
    def sticky(cls) -> "RestitutionModel":
        """The e = 0 limit; outside the physical range, kept for kinematic checks."""
        return cls(kind=RestitutionKind.CONSTANT, e0=0.0, limiting=True)

    @classmethod
    def monotone(cls, a: float, eta: float) -> "RestitutionModel":
        return cls(kind=RestitutionKind.MONOTONE, a=a, eta=eta)

    @classmethod
    def viscoelastic(cls, a: float) -> "RestitutionModel":
        return cls(kind=RestitutionKind.VISCOELASTIC, a=a)

    @classmethod
    def from_params(
        cls,
        kind: str,
        e0: Optional[float] = None,
        a: Optional[float] = None,
        eta: Optional[float] = None,
    ) -> "RestitutionModel":
        """Build a model from loosely typed parameters, naming what is missing.

        Raises:
            ConfigError: If the kind is unknown or a required parameter is absent.
        """
        try:
            kind = RestitutionKind(kind)
        except ValueError as exc:
            raise ConfigError(f"unknown restitution.kind '{kind}'") from exc

        required = {
            RestitutionKind.CONSTANT: {"restitution.e0": e0},
            RestitutionKind.MONOTONE: {"restitution.a": a, "restitution.eta": eta},
            RestitutionKind.VISCOELASTIC: {"restitution.a": a},
        }[kind]
        for key, value in required.items():
            if value is None:
                raise ConfigError(f"missing required key '{key}' for {kind.value} restitution")

        if kind is RestitutionKind.CONSTANT:
            return cls.constant(e0)
        if kind is RestitutionKind.MONOTONE:
            return cls.monotone(a, eta)
        return cls.viscoelastic(a)

    def eval(self, r: ArrayLike) -> ArrayLike:
        speeds = _as_speeds(r)
        if self.kind is RestitutionKind.CONSTANT:
            values = np.full_like(speeds, self.e0)
        elif self.kind is RestitutionKind.MONOTONE:
            values = 1.0 / (1.0 + self.a * np.power(speeds, self.eta))
        else:
            values = solve_viscoelastic(self.a, speeds)
        return _like_input(values, r)

    def deficit(self, r: ArrayLike) -> ArrayLike:
        """Return 1 - e(r) without cancellation at small impact speeds."""
        speeds = _as_speeds(r)
        if self.kind is RestitutionKind.CONSTANT:
            values = np.full_like(speeds, 1.0 - self.e0)
        elif self.kind is RestitutionKind.MONOTONE:
            scaled = self.a * np.power(speeds, self.eta)
            values = scaled / (1.0 + scaled)
        else:
            # 1 - e = a r^(1/5) e^(3/5)
            e = solve_viscoelastic(self.a, speeds)
            values = self.a * np.power(speeds, 0.2) * np.power(e, 0.6)
        return _like_input(values, r)

    @property
    def gamma(self) -> float:
        if self.kind is RestitutionKind.CONSTANT:
            return 0.0
        if self.kind is RestitutionKind.MONOTONE:
            return self.eta
        return 0.2

    @property
    def alpha(self) -> float:
        if self.kind is RestitutionKind.CONSTANT:
            return 1.0 - self.e0
        return self.a

    @property
    def deficit_coefficient(self) -> float:
        if self.kind is RestitutionKind.CONSTANT:
            return 1.0 - self.e0**2
        return 2.0 * self.a

    @property
    def e_infinity(self) -> float:
        if self.kind is RestitutionKind.CONSTANT:
            return self.e0
        return 0.0

    @property
    def is_elastic(self) -> bool:
        return self.kind is RestitutionKind.CONSTANT and self.e0 == 1.0

    def describe(self) -> str:
        if self.kind is RestitutionKind.CONSTANT:
            return f"constant(e0={self.e0:g})"
        if self.kind is RestitutionKind.MONOTONE:
            return f"monotone(a={self.a:g}, eta={self.eta:g})"
        return f"viscoelastic(a={self.a:g})"


@dataclass
class AssumptionReport:
    """Outcome of :func:`check_assumptions`."""

    monotone_vartheta: bool
    fitted_gamma: float
    fitted_alpha: float
    e_at_rmax: float
    jacobian_positive: bool
    derivative_exponent: Optional[float]
    quadratic_deficit: float
    fit_ok: bool = True


def _slope_fit(x: np.ndarray, y: np.ndarray):
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def check_assumptions(
    model: RestitutionLaw, r_max: float, n_grid: int = 200, decades: float = 6.0
) -> AssumptionReport:
    """Check the structural assumptions on a log-spaced grid up to ``r_max``.

    Verifies that ϑ(r) = r e(r) is strictly increasing, fits (alpha, gamma) on
    log(1 - e) against log r over the smallest decade of the grid, estimates
    the growth exponent k of e'(r) = O(r^k) over the largest decade and
    reports e(r_max).

    Args:
        model: Restitution law to check.
        r_max: Largest impact speed of the grid.
        n_grid: Number of grid points (at least 16).
        decades: Number of decades covered by the grid below r_max.

    Returns:
        AssumptionReport. A failed (alpha, gamma) fit is reported, not raised.
    """
    if not r_max > 0.0:
        raise ValueError("r_max must be positive")
    if n_grid < 16:
        raise ValueError("n_grid must be at least 16")

    grid = np.logspace(math.log10(r_max) - decades, math.log10(r_max), n_grid)
    e_values = np.asarray(model.eval(grid))
    vartheta = grid * e_values
    scale = float(np.max(np.abs(vartheta)))
    monotone = bool(np.all(np.diff(vartheta) > -1e-13 * scale))
    jacobian_positive = bool(np.all(np.asarray(model.jacobian(grid)) > 0.0))

    small = grid <= grid[0] * 10.0
    deficit = 1.0 - e_values[small]
    fit_ok = True
    if np.all(deficit > 0.0):
        gamma_fit, log_alpha = _slope_fit(np.log(grid[small]), np.log(deficit))
        if abs(gamma_fit) < 1e-10:
            gamma_fit = 0.0
        alpha_fit = math.exp(log_alpha)
    else:
        logger.warning("1 - e(r) vanishes on the small-impact window; (alpha, gamma) not fitted")
        gamma_fit, alpha_fit, fit_ok = float("nan"), float("nan"), False

    derivative_exponent = None
    large = grid >= grid[-1] / 10.0
    h = 1e-6 * grid[large]
    derivative = np.abs(
        (np.asarray(model.eval(grid[large] + h)) - np.asarray(model.eval(grid[large] - h)))
        / (2.0 * h)
    )
    if np.all(derivative > 0.0):
        derivative_exponent, _ = _slope_fit(np.log(grid[large]), np.log(derivative))

    report = AssumptionReport(
        monotone_vartheta=monotone,
        fitted_gamma=gamma_fit,
        fitted_alpha=alpha_fit,
        e_at_rmax=float(e_values[-1]),
        jacobian_positive=jacobian_positive,
        derivative_exponent=derivative_exponent,
        quadratic_deficit=model.deficit_coefficient,
        fit_ok=fit_ok,
    )
    logger.debug("Assumption report: %s", report)
    return report
