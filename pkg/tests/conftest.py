"""Shared fixtures for the haffsim test suite."""

import math

import numpy as np
import pytest
from scipy.special import gamma as gamma_function, gammaln

from haffsim.core.dsmc import InitialCondition, RecordSchedule, SimConfig
from haffsim.core.ensemble import SimMode
from haffsim.core.restitution import RestitutionModel
from haffsim.core.series import MomentSeries

SMALL_CHECK_CONFIG = """\
restitution.kind = constant
restitution.e0 = 0.5
particles.n = 2000
time.t_end = 100
initial.energy = 36
record.count = 24
record.t_min = 1
seed = 5
check.window = 1,100
check.tolerance = 0.3
"""


def maxwellian_moment(p: float, energy: float = 1.0) -> float:
    """m_p of the Maxwellian with (1/N) Σ |v|² = energy."""
    return (2.0 * energy / 3.0) ** p * gamma_function(p + 1.5) / gamma_function(1.5)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def constant_half():
    return RestitutionModel.constant(0.5)


@pytest.fixture
def elastic():
    return RestitutionModel.constant(1.0)


@pytest.fixture
def viscoelastic():
    return RestitutionModel.viscoelastic(0.12)


@pytest.fixture
def monotone():
    return RestitutionModel.monotone(1.0, 1.0)


@pytest.fixture
def small_config():
    """A fast physical run: 2000 particles, constant e0 = 0.5, ten linear records."""

    def build(**overrides) -> SimConfig:
        settings = {
            "n_particles": 2000,
            "restitution": RestitutionModel.constant(0.5),
            "t_end": 1.0,
            "initial": InitialCondition(energy=1.0),
            "record": RecordSchedule(kind="linear", dt=0.1),
            "seed": 7,
        }
        settings.update(overrides)
        return SimConfig(**settings)

    return build


@pytest.fixture
def power_law_series():
    """Synthetic series with E = E0 (1 + t)^exponent and m_p = E^p on log-spaced records."""

    def build(exponent: float = -2.0, E0: float = 1.0, orders=(0.5, 1.5, 2.0, 3.0), count=48):
        t = np.concatenate(([0.0], np.geomspace(0.1, 1000.0, count)))
        energy = E0 * (1.0 + t) ** exponent
        series = MomentSeries(moment_orders=orders, mode=SimMode.PHYSICAL)
        for index, (time, value) in enumerate(zip(t, energy)):
            record = {"t": time, "tau": math.log1p(time), "E": value, "theta": value}
            for p in orders:
                record[f"m_{p:g}"] = value**p
            record["ncoll"] = 10 * index
            record["E_se"] = 0.0
            record["theta_se"] = 0.0
            series.append(record)
        return series

    return build


def tail_series(q0=3.0, orders=(0.5, 1.0, 2.0, 3.0, 4.0, 5.0), count=40, mode=SimMode.PHYSICAL):
    """Series whose moments are exactly Γ(2p + 1/2) q0^p on every record."""
    series = MomentSeries(moment_orders=orders, mode=mode)
    for index in range(count):
        record = {"t": float(index), "tau": math.log1p(index), "E": 1.0, "theta": 1.0}
        for p in orders:
            record[f"m_{p:g}"] = math.exp(gammaln(2.0 * p + 0.5)) * q0**p
        record.update({"ncoll": index, "E_se": 0.0, "theta_se": 0.0})
        series.append(record)
    return series
