"""
Cooling Diagnostics

Post-processing of moment series: power-law fits of the cooling law and of
the moments, the moment-ratio law with its Jensen lower bound, domination by
the upper-bound ODE, and renormalized moments certifying exponential tails.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import gammaln
from scipy.stats import linregress

from haffsim.core.ensemble import SimMode
from haffsim.core.errors import FitError
from haffsim.core.series import MomentSeries

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 8
STABILIZATION_TOLERANCE = 1.05
GAMMA_ARGUMENT_LIMIT = 170.0


@dataclass
class HaffFit:
    """Least-squares power law y ≈ exp(intercept) (1 + t)^exponent on ``window``."""

    exponent: float
    intercept: float
    window: Tuple[float, float]
    stderr: float
    n_points: int


@dataclass
class MomentRatio:
    p: float
    max_ratio: float
    stabilized: bool
    jensen_ok: bool
    jensen_violations: int
    ratios: np.ndarray = field(repr=False)


@dataclass
class MomentDecay:
    p: float
    fit: HaffFit
    target: float


@dataclass
class UpperBoundCheck:
    violations: int
    max_excess_sigma: float
    ok: bool


@dataclass
class TailReport:
    """Tail certificate of the renormalized moments.

    ``q_raw`` is the largest z_p^{1/p} observed. ``q_certificate`` equals
    max(q_raw, 1) when the per-record certificate stabilizes and q_raw
    otherwise, so a value below 1 is never hidden in an unbounded run.
    """

    b_offset: float
    q_certificate: float
    bounded: bool
    q_raw: float
    orders: List[float]


@dataclass
class ZTable:
    """Renormalized moments z_p(τ) for each retained order p."""

    times: np.ndarray
    values: Dict[float, np.ndarray]


def haff_target(gamma: float) -> float:
    """Decay exponent -2/(1+γ) of the generalized Haff law."""
    return -2.0 / (1.0 + gamma)


def default_window(t: np.ndarray) -> Tuple[float, float]:
    """The last two decades of recorded time."""
    t_max = float(np.max(t))
    return t_max / 100.0, t_max


def fit_power_law(
    t: Sequence[float], y: Sequence[float], window: Optional[Tuple[float, float]] = None
) -> HaffFit:
    """Fit log y = intercept + exponent log(1 + t) on the records inside ``window``.

    Raises:
        FitError: If fewer than 8 records fall in the window or y is not positive there.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    t_lo, t_hi = window if window is not None else default_window(t)
    if not t_lo < t_hi:
        raise FitError(f"empty fit window [{t_lo:g}, {t_hi:g}]")
    inside = (t >= t_lo * (1.0 - 1e-12)) & (t <= t_hi * (1.0 + 1e-12))
    n_points = int(np.count_nonzero(inside))
    if n_points < MIN_FIT_POINTS:
        raise FitError(
            f"fit window [{t_lo:g}, {t_hi:g}] holds {n_points} records, need {MIN_FIT_POINTS}"
        )
    if np.any(y[inside] <= 0.0):
        raise FitError("values must be positive on the fit window")

    result = linregress(np.log1p(t[inside]), np.log(y[inside]))
    return HaffFit(
        exponent=float(result.slope),
        intercept=float(result.intercept),
        window=(float(t_lo), float(t_hi)),
        stderr=float(result.stderr),
        n_points=n_points,
    )


def running_max_stabilized(
    values: Sequence[float], tolerance: float = STABILIZATION_TOLERANCE
) -> bool:
    """True when the last-quartile maximum is within ``tolerance`` of the earlier maximum."""
    values = np.asarray(values, dtype=float)
    if values.size < 4 or not np.all(np.isfinite(values)):
        return False
    cut = int(0.75 * values.size)
    return bool(values[cut:].max() <= tolerance * values[:cut].max())


def moment_ratio_report(
    series: MomentSeries, p_list: Sequence[float], n_sigma: float = 3.0
) -> List[MomentRatio]:
    """m_p / E^p over time, its maximum and stabilization, and the Jensen bound m_p ≥ E^p.

    The Jensen bound is checked for p ≥ 1, with an allowance of ``n_sigma``
    standard errors of E^p when the series carries them.
    """
    energy = series.moment_energy()
    if np.any(energy <= 0.0):
        raise FitError("energy must be positive on every record")
    energy_se = np.nan_to_num(series.moment_energy_se(), nan=0.0)
    report = []
    for p in p_list:
        ratios = series.moment(p) / energy**p
        jensen_ok, violations = True, 0
        if p >= 1.0:
            allowance = n_sigma * p * energy_se / energy
            violations = int(np.count_nonzero(ratios < 1.0 - allowance - 1e-12))
            jensen_ok = violations == 0
        report.append(
            MomentRatio(
                p=p,
                max_ratio=float(ratios.max()),
                stabilized=running_max_stabilized(ratios),
                jensen_ok=jensen_ok,
                jensen_violations=violations,
                ratios=ratios,
            )
        )
    return report


def moment_decay_report(
    series: MomentSeries,
    p_list: Sequence[float],
    gamma: float,
    window: Optional[Tuple[float, float]] = None,
) -> List[MomentDecay]:
    """Fit each physical moment m_p(t) against the target exponent -2p/(1+γ).

    In self-similar mode the stored moments are converted back with m_p(v) = m_p(w) E^p/Θ^p.
    """
    t = series.t
    scale = series.column("E") / series.column("theta")
    rows = []
    for p in p_list:
        values = series.moment(p)
        if series.mode is SimMode.SELF_SIMILAR:
            values = values * scale**p
        fit = fit_power_law(t, values, window)
        rows.append(MomentDecay(p=p, fit=fit, target=p * haff_target(gamma)))
    return rows


def upper_bound_check(
    series: MomentSeries, bound: Sequence[float], n_sigma: float = 3.0
) -> UpperBoundCheck:
    """Count records where the DSMC energy exceeds the ODE bound by more than ``n_sigma`` errors."""
    energy = series.column("E")
    bound = np.asarray(bound, dtype=float)
    if bound.shape != energy.shape:
        raise ValueError("bound must be sampled on the series record times")
    sigma = np.nan_to_num(series.column("E_se"), nan=0.0)
    excess = energy - bound
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(sigma > 0.0, excess / sigma, np.where(excess > 0.0, np.inf, 0.0))
    violations = int(np.count_nonzero(excess > n_sigma * sigma + 1e-12 * np.abs(bound)))
    return UpperBoundCheck(
        violations=violations,
        max_excess_sigma=float(np.max(scaled)) if scaled.size else 0.0,
        ok=violations == 0,
    )


def renormalized_moments(
    series: MomentSeries, a: float = 2.0, b_offset: float = 0.5
) -> Tuple[ZTable, TailReport]:
    """z_p = m_p / Γ(a p + b) for every stored order p > 0, and the certificate Q.

    Q is the largest z_p^{1/p} over orders and records. The moments are
    bounded when the per-record certificate stabilizes; only then is Q
    floored at 1.

    Raises:
        ValueError: If the parameters are out of range or the stored orders stop below 4.
    """
    if not a >= 1.0:
        raise ValueError("a must be at least 1")
    if not 0.0 < b_offset < 1.0:
        raise ValueError("b_offset must lie in (0, 1)")
    orders = [p for p in series.moment_orders if p > 0.0]
    if not orders or max(orders) < 4.0:
        raise ValueError("renormalized moments need stored orders up to at least 4")

    kept = [p for p in orders if a * p + b_offset <= GAMMA_ARGUMENT_LIMIT]
    dropped = [p for p in orders if p not in kept]
    if dropped:
        logger.warning("Dropping orders %s: Gamma(a p + b) overflows", dropped)

    values = {}
    roots = []
    for p in kept:
        moment = series.moment(p)
        with np.errstate(divide="ignore"):
            log_z = np.log(moment) - gammaln(a * p + b_offset)
        values[p] = np.exp(log_z)
        roots.append(np.exp(log_z / p))
    per_record = np.max(np.array(roots), axis=0)
    q_raw = float(per_record.max())
    bounded = running_max_stabilized(per_record)

    report = TailReport(
        b_offset=b_offset,
        q_certificate=max(q_raw, 1.0) if bounded else q_raw,
        bounded=bounded,
        q_raw=q_raw,
        orders=kept,
    )
    table_times = series.tau if series.mode is SimMode.SELF_SIMILAR else series.t
    return ZTable(times=table_times, values=values), report
