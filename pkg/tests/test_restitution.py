"""Tests for the restitution catalog and the assumption checker."""

import math

import numpy as np
import pytest

from haffsim.core.errors import ConfigError
from haffsim.core.restitution import (
    RestitutionKind,
    RestitutionModel,
    check_assumptions,
    solve_viscoelastic,
)


def test_constant_law_is_flat(constant_half):
    r = np.linspace(0.0, 50.0, 11)
    assert np.all(constant_half.eval(r) == 0.5)
    assert constant_half.eval(3.0) == 0.5
    assert isinstance(constant_half.eval(3.0), float)


def test_viscoelastic_is_elastic_at_rest(viscoelastic):
    assert viscoelastic.eval(0.0) == 1.0


def test_viscoelastic_unit_impact(viscoelastic):
    e = viscoelastic.eval(1.0)
    assert 0.88 < e < 0.90
    assert abs(e + 0.12 * e**0.6 - 1.0) < 1e-12


def test_viscoelastic_residual_on_log_grid(viscoelastic):
    r = np.geomspace(1e-6, 1e6, 1000)
    e = viscoelastic.eval(r)
    residual = e + 0.12 * r**0.2 * e**0.6 - 1.0
    assert np.max(np.abs(residual)) < 1e-12


def test_solver_handles_zero_speed():
    assert solve_viscoelastic(0.5, np.array([0.0, 1.0]))[0] == 1.0


@pytest.mark.parametrize(
    "model",
    [
        RestitutionModel.constant(0.5),
        RestitutionModel.monotone(1.0, 1.0),
        RestitutionModel.monotone(0.3, 2.5),
        RestitutionModel.viscoelastic(0.12),
    ],
)
def test_law_is_bounded_and_nonincreasing(model):
    r = np.geomspace(1e-4, 1e4, 400)
    e = model.eval(r)
    assert np.all((e > 0.0) & (e <= 1.0))
    assert np.all(np.diff(e) <= 1e-15)
    beta = model.beta(r)
    assert np.all((beta > 0.5) & (beta <= 1.0))


def test_beta_limits(elastic):
    assert elastic.beta(2.0) == 1.0
    assert RestitutionModel.sticky().beta(2.0) == 0.5


def test_vartheta(constant_half, viscoelastic):
    assert constant_half.vartheta(0.0) == 0.0
    assert constant_half.vartheta(2.0) == pytest.approx(1.0)
    assert viscoelastic.vartheta(2.0) > viscoelastic.vartheta(1.0)


def test_jacobian_of_constant_law(constant_half):
    assert constant_half.jacobian(2.0) == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize(
    "model",
    [
        RestitutionModel.constant(0.5),
        RestitutionModel.monotone(0.5, 2.0),
        RestitutionModel.viscoelastic(0.12),
    ],
    ids=lambda m: m.describe(),
)
def test_deficit_matches_law_and_keeps_small_speeds(model):
    r = np.geomspace(1e-3, 1e3, 25)
    np.testing.assert_allclose(model.deficit(r), 1.0 - model.eval(r), rtol=1e-9, atol=1e-15)
    tiny = 1e-40
    assert model.deficit(tiny) == pytest.approx(model.alpha * tiny**model.gamma, rel=1e-6)
    assert model.deficit(0.0) == pytest.approx(1.0 - model.eval(0.0))


def test_small_impact_parameters(constant_half, monotone, viscoelastic):
    assert constant_half.gamma == 0.0
    assert constant_half.alpha == pytest.approx(0.5)
    assert constant_half.deficit_coefficient == pytest.approx(0.75)
    assert monotone.gamma == 1.0
    assert viscoelastic.gamma == pytest.approx(0.2)
    assert viscoelastic.deficit_coefficient == pytest.approx(0.24)
    assert viscoelastic.e_infinity == 0.0


@pytest.mark.parametrize(
    "builder",
    [
        lambda: RestitutionModel.constant(0.0),
        lambda: RestitutionModel.constant(1.5),
        lambda: RestitutionModel.constant(float("nan")),
        lambda: RestitutionModel.viscoelastic(0.0),
        lambda: RestitutionModel.monotone(1.0, -1.0),
    ],
)
def test_invalid_parameters_are_rejected(builder):
    with pytest.raises(ConfigError):
        builder()


def test_sticky_limit_is_only_reachable_explicitly():
    sticky = RestitutionModel.sticky()
    assert sticky.kind is RestitutionKind.CONSTANT
    assert sticky.eval(1.0) == 0.0


def test_from_params_names_missing_key():
    with pytest.raises(ConfigError, match="restitution.a"):
        RestitutionModel.from_params("viscoelastic")
    with pytest.raises(ConfigError, match="unknown restitution.kind"):
        RestitutionModel.from_params("plastic", e0=0.5)
    model = RestitutionModel.from_params("monotone", a=2.0, eta=0.5)
    assert model.describe() == "monotone(a=2, eta=0.5)"


def test_non_finite_speed_is_rejected(viscoelastic):
    with pytest.raises(ValueError):
        viscoelastic.eval(math.nan)
    with pytest.raises(ValueError):
        viscoelastic.eval(-1.0)


def test_assumptions_viscoelastic(viscoelastic):
    report = check_assumptions(viscoelastic, r_max=10.0)
    assert report.monotone_vartheta
    assert report.jacobian_positive
    assert 0.19 <= report.fitted_gamma <= 0.21
    assert report.fitted_alpha == pytest.approx(0.12, rel=0.05)
    assert report.quadratic_deficit == pytest.approx(0.24)
    assert report.derivative_exponent is not None


def test_assumptions_monotone(monotone):
    report = check_assumptions(monotone, r_max=10.0)
    assert report.monotone_vartheta
    assert 0.98 <= report.fitted_gamma <= 1.02
    assert report.e_at_rmax == pytest.approx(1.0 / 11.0)


def test_assumptions_constant(constant_half):
    report = check_assumptions(constant_half, r_max=10.0)
    assert report.monotone_vartheta
    assert report.fitted_gamma == 0.0
    assert report.derivative_exponent is None


def test_assumptions_elastic_fit_is_reported(elastic, caplog):
    report = check_assumptions(elastic, r_max=10.0)
    assert not report.fit_ok
    assert math.isnan(report.fitted_gamma)
    assert "not fitted" in caplog.text
