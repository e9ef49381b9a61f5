"""
Angular Collision Kernels

This module provides the angular kernels b(û·σ) of the hard-sphere collision
operator: the isotropic kernel and piecewise-linear tabulated kernels, both
normalized so that 2π ∫_{-1}^{1} b(s) ds = 1.
"""

import logging
import math
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Union

import numpy as np
from scipy.integrate import trapezoid

from haffsim.core.errors import ConfigError

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi


def uniform_sphere(n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` unit vectors uniformly on S² (uniform cosine, uniform azimuth)."""
    cos_theta = 2.0 * rng.random(n) - 1.0
    phi = 2.0 * math.pi * rng.random(n)
    sin_theta = np.sqrt(np.maximum(1.0 - cos_theta**2, 0.0))
    return np.column_stack((sin_theta * np.cos(phi), sin_theta * np.sin(phi), cos_theta))


class AngularKernel(ABC):
    """
    Abstract base class for angular kernels b(s), s = û·σ in [-1, 1].

    Subclasses provide point evaluation, the maximum (used as the rejection
    envelope when sampling σ) and the interior kinks of b.
    """

    def __init__(self, name: str):
        self.name = name

    @abstractmethod
    def __call__(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """Evaluate b at cosine(s) ``s``."""

    @property
    @abstractmethod
    def max_value(self) -> float:
        """Maximum of b on [-1, 1]."""

    @property
    def is_isotropic(self) -> bool:
        return False

    @property
    def breakpoints(self) -> np.ndarray:
        """Interior points of [-1, 1] where b is not smooth."""
        return np.empty(0)

    def symmetrized(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """Return b(s) + b(-s)."""
        s = np.asarray(s, dtype=float)
        return self(s) + self(-s)

    @abstractmethod
    def lq_norm(self, q: float) -> float:
        """Norm of b in L^q(S²); ``q = inf`` gives the maximum."""

    @abstractmethod
    def sample_sigma(self, u_hat: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Draw one σ per row of ``u_hat`` with density proportional to b(û·σ)."""

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(name='{self.name}')"


class IsotropicKernel(AngularKernel):
    """The constant kernel b ≡ 1/(4π)."""

    def __init__(self):
        super().__init__("isotropic")

    def __call__(self, s):
        return np.full(np.shape(s), 1.0 / FOUR_PI)

    @property
    def max_value(self) -> float:
        return 1.0 / FOUR_PI

    @property
    def is_isotropic(self) -> bool:
        return True

    def lq_norm(self, q: float) -> float:
        if q < 1.0:
            raise ValueError("q must be at least 1")
        if math.isinf(q):
            return 1.0 / FOUR_PI
        return FOUR_PI ** (1.0 / q - 1.0)

    def sample_sigma(self, u_hat: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return uniform_sphere(len(u_hat), rng)


class TabulatedKernel(AngularKernel):
    """
    Piecewise-linear kernel through the points (s_k, b_k).

    The table must cover [-1, 1] with strictly increasing nodes and
    nonnegative values. A table whose integral over S² is not 1 is rescaled,
    with a warning.
    """

    def __init__(self, nodes, values, name: str = "tabulated"):
        super().__init__(name)
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise ConfigError("kernel table needs two equally long columns with at least 2 rows")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(values))):
            raise ConfigError("kernel table contains non-finite entries")
        if np.any(np.diff(nodes) <= 0.0):
            raise ConfigError("kernel nodes must be strictly increasing")
        if abs(nodes[0] + 1.0) > 1e-12 or abs(nodes[-1] - 1.0) > 1e-12:
            raise ConfigError("kernel nodes must span [-1, 1]")
        if np.any(values < 0.0):
            raise ConfigError("kernel values must be nonnegative")
        nodes[0], nodes[-1] = -1.0, 1.0

        total = 2.0 * math.pi * trapezoid(values, nodes)
        if total <= 0.0:
            raise ConfigError("kernel integrates to zero")
        if abs(total - 1.0) > 1e-10:
            logger.warning("Kernel '%s' integrates to %.12g over S²; rescaling to 1", name, total)
            values = values / total

        self.nodes = nodes
        self.values = values

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "TabulatedKernel":
        """Load a kernel from a whitespace-separated two-column file (s, b)."""
        try:
            table = np.loadtxt(path, ndmin=2, comments="#")
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read kernel file '{path}': {exc}") from exc
        if table.shape[1] != 2:
            raise ConfigError(f"kernel file '{path}' must have exactly two columns")
        return cls(table[:, 0], table[:, 1], name=Path(path).stem)

    def __call__(self, s):
        return np.interp(s, self.nodes, self.values)

    @property
    def max_value(self) -> float:
        return float(self.values.max())

    @property
    def breakpoints(self) -> np.ndarray:
        return self.nodes[1:-1]

    def lq_norm(self, q: float) -> float:
        if q < 1.0:
            raise ValueError("q must be at least 1")
        if math.isinf(q):
            return self.max_value
        # exact integral of a linear segment raised to the power q
        left, right = self.values[:-1], self.values[1:]
        width = np.diff(self.nodes)
        flat = np.isclose(left, right, rtol=1e-12, atol=0.0)
        slope_safe = np.where(flat, 1.0, right - left)
        sloped = (right ** (q + 1.0) - left ** (q + 1.0)) / ((q + 1.0) * slope_safe)
        pieces = width * np.where(flat, left**q, sloped)
        return float((2.0 * math.pi * pieces.sum()) ** (1.0 / q))

    def sample_sigma(self, u_hat: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        sigma = np.empty_like(u_hat, dtype=float)
        pending = np.arange(len(u_hat))
        envelope = self.max_value
        while pending.size:
            candidates = uniform_sphere(pending.size, rng)
            cosines = np.einsum("ij,ij->i", u_hat[pending], candidates)
            accept = rng.random(pending.size) * envelope < self(cosines)
            sigma[pending[accept]] = candidates[accept]
            pending = pending[~accept]
        return sigma
