"""
Particle ensembles: N equally weighted velocities, their clocks and the
generator that drives their collisions.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class SimMode(str, Enum):
    """Frame in which the velocities are stored."""

    PHYSICAL = "physical"
    SELF_SIMILAR = "selfsimilar"


@dataclass
class VelocityEnsemble:
    """
    Velocities representing f(t, ·) (physical mode) or g(τ, ·) (self-similar mode).

    Attributes:
        velocities: Array of shape (N, 3).
        t: Physical time.
        tau: Rescaled time.
        mode: Frame of ``velocities``.
        n_collisions: Accepted collisions so far.
        rng: Generator owned by this ensemble.
    """

    velocities: np.ndarray
    t: float
    tau: float
    mode: SimMode
    rng: np.random.Generator
    n_collisions: int = 0

    @property
    def n_particles(self) -> int:
        return len(self.velocities)

    def squared_speeds(self) -> np.ndarray:
        return np.einsum("ij,ij->i", self.velocities, self.velocities)

    def mean_energy(self) -> float:
        """(1/N) Σ |v_i|² in the frame of the stored velocities."""
        return float(np.mean(self.squared_speeds()))

    def total_momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)
