"""
DSMC Simulator

Stochastic particle simulation of the spatially homogeneous inelastic
Boltzmann equation with hard-sphere rate |u|, by pairwise thinning against a
per-step majorant of the relative speeds. Runs in physical variables or in
self-similar variables (collision sub-step with the rescaled coefficient
followed by the exact drift).
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from haffsim.core.cooling import PsiProfile, psi
from haffsim.core.ensemble import SimMode, VelocityEnsemble
from haffsim.core.errors import ConfigError
from haffsim.core.kernels import AngularKernel, IsotropicKernel
from haffsim.core.kinematics import post_collision_sigma
from haffsim.core.povzner import MomentVector
from haffsim.core.restitution import RestitutionLaw, RestitutionModel
from haffsim.core.selfsim import (
    ScalingParams,
    drift_factor,
    rescaled_restitution,
    tau_of_t,
    velocity_scale,
    zeta,
)
from haffsim.core.series import MomentSeries, moment_column

logger = logging.getLogger(__name__)

MAX_DT_GROWTH = 10.0


class InitialKind(str, Enum):
    MAXWELLIAN = "maxwellian"
    TWO_TEMPERATURE = "two-temperature"
    FILE = "file"


class RecordKind(str, Enum):
    LOG = "log"
    LINEAR = "linear"


@dataclass
class InitialCondition:
    """Law of the initial velocities; always rescaled to ``energy`` and zero momentum."""

    kind: InitialKind = InitialKind.MAXWELLIAN
    energy: float = 1.0
    ratio: float = 4.0
    path: Optional[str] = None

    def __post_init__(self):
        self.kind = InitialKind(self.kind)
        if not (math.isfinite(self.energy) and self.energy > 0.0):
            raise ConfigError(f"initial.energy must be positive, got {self.energy}")
        if not self.ratio > 0.0:
            raise ConfigError(f"initial.ratio must be positive, got {self.ratio}")
        if self.kind is InitialKind.FILE and not self.path:
            raise ConfigError("missing required key 'initial.file' for file initial condition")


@dataclass
class RecordSchedule:
    """Record times: ``count`` log-spaced points from ``t_min`` or a linear step ``dt``."""

    kind: RecordKind = RecordKind.LOG
    count: int = 48
    t_min: float = 0.1
    dt: Optional[float] = None

    def __post_init__(self):
        self.kind = RecordKind(self.kind)
        if self.kind is RecordKind.LOG and (self.count < 2 or not self.t_min > 0.0):
            raise ConfigError("record.count must be >= 2 and record.t_min positive")
        if self.kind is RecordKind.LINEAR and not (self.dt and self.dt > 0.0):
            raise ConfigError("record.dt must be positive for linear records")

    def times(self, t_end: float) -> np.ndarray:
        """Record times after t = 0, ending exactly at ``t_end``."""
        if self.kind is RecordKind.LINEAR:
            n_steps = max(int(math.ceil(t_end / self.dt - 1e-9)), 1)
            times = np.minimum(np.arange(1, n_steps + 1) * self.dt, t_end)
        else:
            t_min = min(self.t_min, t_end)
            times = np.geomspace(t_min, t_end, self.count)
        times[-1] = t_end
        return np.unique(times)


@dataclass
class TailParams:
    r: float
    s: float = 1.0

    def __post_init__(self):
        if not (self.r >= 0.0 and self.s > 0.0):
            raise ConfigError("tail.r must be nonnegative and tail.s positive")


@dataclass
class SimConfig:
    """Everything a single DSMC run needs."""

    n_particles: int
    restitution: RestitutionModel
    t_end: float
    initial: InitialCondition = field(default_factory=InitialCondition)
    coll_per_particle_per_step: float = 0.05
    record: RecordSchedule = field(default_factory=RecordSchedule)
    mode: SimMode = SimMode.PHYSICAL
    moment_orders: Tuple[float, ...] = (0.5, 1.5, 2.0, 3.0)
    tail: Optional[TailParams] = None
    seed: int = 0
    kernel: AngularKernel = field(default_factory=IsotropicKernel)

    def __post_init__(self):
        self.mode = SimMode(self.mode)
        self.moment_orders = tuple(float(p) for p in self.moment_orders)
        if self.n_particles < 2:
            raise ConfigError(f"particles.n must be at least 2, got {self.n_particles}")
        if not (math.isfinite(self.t_end) and self.t_end > 0.0):
            raise ConfigError(f"time.t_end must be positive, got {self.t_end}")
        if not 0.0 < self.coll_per_particle_per_step < 0.5:
            raise ConfigError("time.target must lie in (0, 0.5)")
        if not self.moment_orders or any(p < 0.0 for p in self.moment_orders):
            raise ConfigError("moment_orders must be a nonempty list of nonnegative orders")
        if len(set(self.moment_orders)) != len(self.moment_orders):
            raise ConfigError("moment_orders contains duplicates")
        if self.seed < 0:
            raise ConfigError("seed must be nonnegative")


@dataclass
class RateEstimate:
    rate: float
    stderr: float


def _sample_initial(
    initial: InitialCondition, n_particles: int, rng: np.random.Generator
) -> np.ndarray:
    if initial.kind is InitialKind.FILE:
        try:
            velocities = np.loadtxt(initial.path, ndmin=2, comments="#")
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read initial velocities '{initial.path}': {exc}") from exc
        if velocities.shape[1] != 3:
            raise ConfigError("initial velocity file must have three columns")
        if len(velocities) < 2:
            raise ConfigError("initial velocity file must hold at least 2 velocities")
        if len(velocities) != n_particles:
            logger.warning(
                "Initial file holds %d velocities; particles.n=%d is ignored",
                len(velocities),
                n_particles,
            )
        return velocities.astype(float)

    if initial.kind is InitialKind.TWO_TEMPERATURE:
        # half the particles carry `ratio` times the energy of the other half
        n_hot = n_particles // 2
        scales = np.where(np.arange(n_particles) < n_hot, math.sqrt(initial.ratio), 1.0)
        return rng.standard_normal((n_particles, 3)) * scales[:, None]

    return rng.standard_normal((n_particles, 3))


def init_ensemble(
    config: SimConfig, seed_sequence: Optional[np.random.SeedSequence] = None
) -> VelocityEnsemble:
    """Sample the initial ensemble, then shift to zero momentum and rescale to the target energy.

    Raises:
        ConfigError: For unreadable or degenerate initial data.
    """
    rng = np.random.Generator(np.random.PCG64(seed_sequence or np.random.SeedSequence(config.seed)))
    velocities = _sample_initial(config.initial, config.n_particles, rng)
    velocities -= velocities.mean(axis=0)
    energy = float(np.mean(np.einsum("ij,ij->i", velocities, velocities)))
    if not energy > 0.0:
        raise ConfigError("initial velocities have zero energy and cannot be rescaled")
    velocities *= math.sqrt(config.initial.energy / energy)

    ensemble = VelocityEnsemble(
        velocities=velocities, t=0.0, tau=0.0, mode=config.mode, rng=rng, n_collisions=0
    )
    logger.debug("Initialized %d particles at energy %.6g", len(velocities), ensemble.mean_energy())
    return ensemble


def majorant(ensemble: VelocityEnsemble) -> float:
    """U_maj = 2 max |v_i| ≥ max |v_i - v_j|."""
    return 2.0 * math.sqrt(float(ensemble.squared_speeds().max()))


def step(
    ensemble: VelocityEnsemble,
    dt: float,
    model: RestitutionLaw,
    kernel: Optional[AngularKernel] = None,
    u_max: Optional[float] = None,
) -> VelocityEnsemble:
    """One collision step of length ``dt`` (a Δτ in self-similar mode).

    Draws N U_maj dt / 2 candidate pairs (stochastically rounded) without
    replacement, accepts each with probability |u|/U_maj and collides the
    accepted pairs in the σ parametrization. Advances the clock of the
    ensemble's frame.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    kernel = kernel or IsotropicKernel()
    rng = ensemble.rng
    velocities = ensemble.velocities
    n_particles = len(velocities)
    u_maj = majorant(ensemble) if u_max is None else u_max

    if ensemble.mode is SimMode.PHYSICAL:
        ensemble.t += dt
    else:
        ensemble.tau += dt
    if u_maj == 0.0:
        logger.debug("Condensed ensemble: step is a no-op")
        return ensemble

    expected = 0.5 * n_particles * u_maj * dt
    n_candidates = int(math.floor(expected))
    if rng.random() < expected - n_candidates:
        n_candidates += 1
    n_candidates = min(n_candidates, n_particles // 2)
    if n_candidates == 0:
        return ensemble

    chosen = rng.choice(n_particles, size=2 * n_candidates, replace=False)
    first, second = chosen[:n_candidates], chosen[n_candidates:]
    relative = velocities[first] - velocities[second]
    speeds = np.sqrt(np.einsum("ij,ij->i", relative, relative))
    accepted = rng.random(n_candidates) * u_maj < speeds
    first, second = first[accepted], second[accepted]
    if first.size == 0:
        return ensemble

    u_hat = relative[accepted] / speeds[accepted, None]
    sigma = kernel.sample_sigma(u_hat, rng)
    outcome = post_collision_sigma(velocities[first], velocities[second], sigma, model)
    velocities[first] = outcome.v_prime
    velocities[second] = outcome.vbar_prime
    ensemble.n_collisions += int(first.size)
    return ensemble


def moments(ensemble: VelocityEnsemble, p_list: Sequence[float]) -> MomentVector:
    """m_p = (1/N) Σ |v_i|^{2p} in the ensemble's frame."""
    if len(p_list) == 0:
        raise ValueError("p_list must not be empty")
    squared = ensemble.squared_speeds()
    values = {}
    for p in p_list:
        if p < 0.0:
            raise ValueError(f"moment order must be nonnegative, got {p}")
        values[p] = 1.0 if p == 0.0 else float(np.mean(squared**p))
    return MomentVector(values)


def tail_functional(
    ensemble: VelocityEnsemble, r: float, s: float = 1.0, physical_scale: float = 1.0
) -> float:
    """(1/N) Σ exp(r (physical_scale |v_i|)^s); +inf (with a warning) on overflow."""
    if r < 0.0 or not s > 0.0:
        raise ValueError("tail_functional needs r >= 0 and s > 0")
    if r == 0.0:
        return 1.0
    speeds = physical_scale * np.sqrt(ensemble.squared_speeds())
    with np.errstate(over="ignore"):
        value = float(np.mean(np.exp(r * speeds**s)))
    if math.isinf(value):
        logger.warning("Tail functional overflowed at r=%g, s=%g", r, s)
    return value


def dissipation_rate_estimate(
    ensemble: VelocityEnsemble,
    model: RestitutionLaw,
    n_pairs: int = 10_000,
    kernel: Optional[AngularKernel] = None,
    rng: Optional[np.random.Generator] = None,
) -> RateEstimate:
    """Monte Carlo estimate of -dE/dt = ⟨Ψ_e(|v_i - v_j|²)⟩ over uniform pairs i ≠ j.

    Uses ``rng`` when given, otherwise the ensemble's generator.
    """
    if n_pairs < 1000:
        raise ValueError("n_pairs must be at least 1000")
    rng = rng or ensemble.rng
    n_particles = ensemble.n_particles
    first = rng.integers(0, n_particles, n_pairs)
    second = (first + rng.integers(1, n_particles, n_pairs)) % n_particles
    relative = ensemble.velocities[first] - ensemble.velocities[second]
    profile = PsiProfile(model, kernel or IsotropicKernel())
    values = psi(profile, np.einsum("ij,ij->i", relative, relative))
    return RateEstimate(
        rate=float(values.mean()), stderr=float(values.std(ddof=1) / math.sqrt(n_pairs))
    )


def _record(
    series: MomentSeries,
    ensemble: VelocityEnsemble,
    params: ScalingParams,
    config: SimConfig,
) -> None:
    squared = ensemble.squared_speeds()
    n_particles = len(squared)
    stored_energy = float(np.mean(squared))
    stored_se = float(np.std(squared, ddof=1) / math.sqrt(n_particles))
    if ensemble.mode is SimMode.PHYSICAL:
        scale = velocity_scale(params, ensemble.t)
        energy, energy_se = stored_energy, stored_se
        theta, theta_se = scale**2 * stored_energy, scale**2 * stored_se
        tau = tau_of_t(params, ensemble.t)
    else:
        scale = velocity_scale(params, ensemble.t)
        theta, theta_se = stored_energy, stored_se
        energy, energy_se = stored_energy / scale**2, stored_se / scale**2
        tau = ensemble.tau

    record = {"t": ensemble.t, "tau": tau, "E": energy, "theta": theta}
    moment_vector = moments(ensemble, config.moment_orders)
    for p in config.moment_orders:
        record[moment_column(p)] = moment_vector[p]
    if config.tail is not None:
        record["tail"] = tail_functional(ensemble, config.tail.r, config.tail.s)
    record["ncoll"] = ensemble.n_collisions
    record["E_se"] = energy_se
    record["theta_se"] = theta_se
    series.append(record)


def simulate(
    config: SimConfig, seed_sequence: Optional[np.random.SeedSequence] = None
) -> MomentSeries:
    """Run one replica and record the configured schedule.

    dt is chosen so that the expected number of collisions per particle per
    step equals ``coll_per_particle_per_step`` (with U_maj as the rate
    estimate), may grow by at most a factor 10 from one step to the next, and
    is clipped to land on every record time. In self-similar mode the steps
    are in τ and each one is a collision sub-step with ẽ_τ followed by the
    exact drift.
    """
    params = ScalingParams(config.restitution)
    ensemble = init_ensemble(config, seed_sequence)
    series = MomentSeries(
        moment_orders=config.moment_orders, mode=config.mode, has_tail=config.tail is not None
    )
    record_times = config.record.times(config.t_end)
    if config.mode is SimMode.SELF_SIMILAR:
        targets = np.asarray(tau_of_t(params, record_times))
    else:
        targets = record_times

    _record(series, ensemble, params, config)
    previous_dt = None
    for target, record_time in zip(targets, record_times):
        while True:
            clock = ensemble.t if config.mode is SimMode.PHYSICAL else ensemble.tau
            remaining = target - clock
            if remaining <= 0.0:
                break
            u_maj = majorant(ensemble)
            proposal = config.coll_per_particle_per_step / u_maj if u_maj > 0.0 else remaining
            if previous_dt is not None:
                proposal = min(proposal, MAX_DT_GROWTH * previous_dt)
            previous_dt = proposal
            hits_target = proposal >= remaining
            dt = remaining if hits_target else proposal

            if config.mode is SimMode.PHYSICAL:
                step(ensemble, dt, config.restitution, config.kernel, u_max=u_maj)
                if hits_target:
                    ensemble.t = float(target)
            else:
                tau_before = ensemble.tau
                model = rescaled_restitution(params, tau_before)
                step(ensemble, dt, model, config.kernel, u_max=u_maj)
                ensemble.velocities *= drift_factor(params, tau_before, dt)
                if hits_target:
                    ensemble.tau = float(target)
                ensemble.t = float(record_time) if hits_target else zeta(params, ensemble.tau)

        _record(series, ensemble, params, config)
        logger.info(
            "t=%.6g E=%.6g collisions=%d",
            ensemble.t,
            series.columns["E"][-1],
            ensemble.n_collisions,
        )
    return series


def run_replicas(
    config: SimConfig, replicas: int = 1, max_workers: Optional[int] = None
) -> Tuple[List[MomentSeries], MomentSeries]:
    """Run independent replicas on a thread pool and merge them in replica order.

    Replica k uses the k-th child of SeedSequence(seed); a single replica
    reproduces :func:`simulate` exactly.

    Returns:
        The per-replica series and their merge.
    """
    if replicas < 1:
        raise ConfigError("replicas must be at least 1")
    if replicas == 1:
        series = simulate(config)
        return [series], series

    children = np.random.SeedSequence(config.seed).spawn(replicas)
    workers = max(1, min(replicas, max_workers or replicas))
    logger.info("Running %d replicas on %d workers", replicas, workers)
    with ThreadPoolExecutor(max_workers=workers) as executor:
        results = list(executor.map(lambda child: simulate(config, child), children))
    return results, MomentSeries.merge(results)
