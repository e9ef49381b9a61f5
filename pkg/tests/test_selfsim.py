"""Tests for the self-similar scaling functions and the rescaled restitution."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from haffsim.core.ensemble import SimMode, VelocityEnsemble
from haffsim.core.errors import ConfigError
from haffsim.core.selfsim import (
    ScalingParams,
    drift_factor,
    lambda_,
    rescale_ensemble,
    rescaled_restitution,
    tau_of_t,
    velocity_scale,
    xi,
    zeta,
)


@pytest.fixture
def visco_params(viscoelastic):
    return ScalingParams(viscoelastic)


@pytest.fixture
def constant_params(constant_half):
    return ScalingParams(constant_half)


def test_velocity_scale_examples(visco_params, constant_params):
    assert velocity_scale(visco_params, 0.0) == 1.0
    assert velocity_scale(constant_params, 3.0) == pytest.approx(4.0, rel=1e-14)
    assert velocity_scale(visco_params, 63.0) == pytest.approx(32.0, rel=1e-12)


def test_tau_examples(visco_params, constant_params):
    assert tau_of_t(visco_params, 0.0) == 0.0
    assert tau_of_t(constant_params, math.e - 1.0) == pytest.approx(1.0, rel=1e-14)
    assert constant_params.logarithmic
    assert not visco_params.logarithmic


@pytest.mark.parametrize("gamma_model", ["constant", "visco", "monotone"])
def test_zeta_inverts_tau(gamma_model, constant_half, viscoelastic, monotone):
    model = {"constant": constant_half, "visco": viscoelastic, "monotone": monotone}[gamma_model]
    params = ScalingParams(model)
    t = np.concatenate(([0.0], np.geomspace(1e-8, 1e8, 200)))
    np.testing.assert_allclose(zeta(params, tau_of_t(params, t)), t, rtol=1e-10, atol=1e-300)


def test_xi_is_the_growth_rate_of_the_scale(visco_params):
    for t in (0.5, 10.0, 1e4):
        h = 1e-6 * (1.0 + t)
        upper, lower = velocity_scale(visco_params, t + h), velocity_scale(visco_params, t - h)
        dV_dt = (upper - lower) / (2 * h)
        tau = tau_of_t(visco_params, t)
        # dτ/dt = 1/V, so dV/dτ = V dV/dt, and ξ = (dV/dτ)/V = dV/dt
        assert xi(visco_params, tau) == pytest.approx(dV_dt, rel=1e-6)


def test_xi_and_lambda_constants(constant_params, visco_params):
    assert xi(constant_params, 7.0) == 1.0
    assert xi(visco_params, 0.0) == pytest.approx(1.0 / 1.2)
    np.testing.assert_array_equal(lambda_(visco_params, np.array([0.0, 3.0])), 1.0)


@pytest.mark.parametrize("tau, dtau", [(0.0, 0.1), (2.0, 0.5), (40.0, 3.0)])
def test_drift_factor_integrates_xi(visco_params, constant_params, tau, dtau):
    for params in (visco_params, constant_params):
        integral, _ = quad(lambda s: xi(params, s), tau, tau + dtau, epsabs=0.0, epsrel=1e-13)
        assert drift_factor(params, tau, dtau) == pytest.approx(math.exp(integral), rel=1e-12)


def test_drift_over_tau_matches_velocity_scale(visco_params):
    t0, t1 = 3.0, 250.0
    tau0, tau1 = tau_of_t(visco_params, t0), tau_of_t(visco_params, t1)
    ratio = velocity_scale(visco_params, t1) / velocity_scale(visco_params, t0)
    assert drift_factor(visco_params, tau0, tau1 - tau0) == pytest.approx(ratio, rel=1e-12)


def test_rescaled_restitution(visco_params, viscoelastic):
    at_start = rescaled_restitution(visco_params, 0.0)
    r = np.geomspace(1e-3, 1e3, 50)
    np.testing.assert_array_equal(at_start.eval(r), viscoelastic.eval(r))

    later = [rescaled_restitution(visco_params, tau).eval(1.0) for tau in (0.0, 1.0, 10.0, 100.0)]
    assert all(a < b for a, b in zip(later, later[1:]))
    assert later[-1] < 1.0

    tau = 5.0
    shrink = (1.0 + 0.2 * tau / 1.2) ** (-1.0 / 0.2)
    assert rescaled_restitution(visco_params, tau).eval(2.0) == pytest.approx(
        viscoelastic.eval(2.0 * shrink), rel=1e-13
    )


def test_rescaled_constant_law_is_unchanged(constant_params):
    model = rescaled_restitution(constant_params, 12.0)
    assert model.eval(3.0) == 0.5
    assert model.gamma == 0.0


def test_rescaled_small_impact_coefficient(visco_params):
    tau = 4.0
    model = rescaled_restitution(visco_params, tau)
    assert model.deficit_coefficient == pytest.approx(0.24 / model.scale**0.2)
    with pytest.raises(ValueError):
        rescaled_restitution(visco_params, -1.0)


def test_scaling_params_reject_mismatched_gamma(viscoelastic):
    assert ScalingParams(viscoelastic, gamma=0.2).gamma == 0.2
    with pytest.raises(ConfigError):
        ScalingParams(viscoelastic, gamma=0.5)


def test_rescale_ensemble_round_trip(visco_params, rng):
    velocities = rng.standard_normal((100, 3))
    physical = VelocityEnsemble(
        velocities=velocities.copy(), t=63.0, tau=0.0, mode=SimMode.PHYSICAL, rng=rng
    )
    rescaled = rescale_ensemble(physical, visco_params)
    assert rescaled.mode is SimMode.SELF_SIMILAR
    assert rescaled.tau == pytest.approx(tau_of_t(visco_params, 63.0))
    np.testing.assert_allclose(rescaled.velocities, 32.0 * velocities, rtol=1e-12)

    back = rescale_ensemble(rescaled, visco_params)
    assert back.mode is SimMode.PHYSICAL
    assert back.t == pytest.approx(63.0, rel=1e-12)
    np.testing.assert_allclose(back.velocities, velocities, rtol=1e-12)
