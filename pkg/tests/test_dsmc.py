"""Tests for the DSMC simulator: initialization, collision steps, observables and runs."""

import io
import math

import numpy as np
import pytest
from scipy.spatial.distance import pdist

from conftest import maxwellian_moment
from haffsim.core.cooling import PsiProfile, psi
from haffsim.core.dsmc import (
    InitialCondition,
    RecordSchedule,
    TailParams,
    dissipation_rate_estimate,
    init_ensemble,
    majorant,
    moments,
    run_replicas,
    simulate,
    step,
    tail_functional,
)
from haffsim.core.ensemble import SimMode, VelocityEnsemble
from haffsim.core.errors import ConfigError
from haffsim.core.kernels import TabulatedKernel
from haffsim.core.povzner import MomentVector, moment_rhs
from haffsim.core.restitution import RestitutionModel
from haffsim.core.selfsim import ScalingParams, tau_of_t, velocity_scale
from haffsim.core.series import MomentSeries


def ensemble_of(velocities, rng=None, mode=SimMode.PHYSICAL):
    return VelocityEnsemble(
        velocities=np.asarray(velocities, dtype=float),
        t=0.0,
        tau=0.0,
        mode=mode,
        rng=rng or np.random.default_rng(0),
    )


def csv_text(series: MomentSeries) -> str:
    buffer = io.StringIO()
    series.write_csv(buffer)
    return buffer.getvalue()


class TestInitialization:
    def test_energy_and_momentum_are_normalized(self, small_config):
        ensemble = init_ensemble(small_config(initial=InitialCondition(energy=2.5)))
        assert ensemble.mean_energy() == pytest.approx(2.5, rel=1e-12)
        mean_speed = np.mean(np.linalg.norm(ensemble.velocities, axis=1))
        assert np.all(np.abs(ensemble.total_momentum()) <= 1e-12 * 2000 * mean_speed)

    def test_same_seed_same_velocities(self, small_config):
        first = init_ensemble(small_config(seed=42))
        second = init_ensemble(small_config(seed=42))
        other = init_ensemble(small_config(seed=43))
        np.testing.assert_array_equal(first.velocities, second.velocities)
        assert not np.array_equal(first.velocities, other.velocities)

    def test_two_temperature_start(self, small_config):
        config = small_config(
            n_particles=20_000, initial=InitialCondition(kind="two-temperature", ratio=4.0)
        )
        ensemble = init_ensemble(config)
        squared = ensemble.squared_speeds()
        assert ensemble.mean_energy() == pytest.approx(1.0, rel=1e-12)
        assert squared[:10_000].mean() / squared[10_000:].mean() == pytest.approx(4.0, rel=0.1)

    def test_velocities_from_file(self, small_config, tmp_path, caplog):
        path = tmp_path / "v.dat"
        path.write_text("1 0 0\n-1 0 0\n0 2 0\n", encoding="utf-8")
        config = small_config(initial=InitialCondition(kind="file", path=str(path), energy=1.0))
        ensemble = init_ensemble(config)
        assert ensemble.n_particles == 3
        assert ensemble.mean_energy() == pytest.approx(1.0, rel=1e-12)
        assert "ignored" in caplog.text

    @pytest.mark.parametrize(
        "content", ["0 0 0\n0 0 0\n", "1 2 3\n", "1 2\n3 4\n", "a b c\n1 2 3\n"]
    )
    def test_degenerate_files_are_rejected(self, small_config, tmp_path, content):
        path = tmp_path / "v.dat"
        path.write_text(content, encoding="utf-8")
        config = small_config(initial=InitialCondition(kind="file", path=str(path)))
        with pytest.raises(ConfigError):
            init_ensemble(config)

    def test_file_kind_needs_a_path(self):
        with pytest.raises(ConfigError, match="initial.file"):
            InitialCondition(kind="file")


class TestConfigValidation:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"n_particles": 1},
            {"t_end": 0.0},
            {"coll_per_particle_per_step": 0.6},
            {"moment_orders": (1.0, 1.0)},
            {"moment_orders": (-1.0,)},
            {"seed": -3},
        ],
    )
    def test_invalid_settings(self, small_config, overrides):
        with pytest.raises(ConfigError):
            small_config(**overrides)

    def test_record_times(self):
        log_times = RecordSchedule(count=5, t_min=0.1).times(1000.0)
        np.testing.assert_allclose(log_times, [0.1, 1.0, 10.0, 100.0, 1000.0])
        assert log_times[-1] == 1000.0
        linear = RecordSchedule(kind="linear", dt=0.3).times(1.0)
        np.testing.assert_allclose(linear, [0.3, 0.6, 0.9, 1.0])
        with pytest.raises(ConfigError):
            RecordSchedule(kind="linear")
        with pytest.raises(ConfigError):
            TailParams(r=-1.0)


class TestStep:
    def test_elastic_steps_conserve_energy_and_momentum(self, small_config, elastic):
        ensemble = init_ensemble(small_config(n_particles=1000, restitution=elastic))
        momentum = ensemble.total_momentum().copy()
        for _ in range(5000):
            step(ensemble, 0.01, elastic)
        assert ensemble.n_collisions > 0
        assert ensemble.mean_energy() == pytest.approx(1.0, rel=1e-10)
        mean_speed = np.mean(np.linalg.norm(ensemble.velocities, axis=1))
        assert np.all(np.abs(ensemble.total_momentum() - momentum) <= 1e-12 * 1000 * mean_speed)
        assert ensemble.t == pytest.approx(50.0)

    @pytest.mark.parametrize(
        "model",
        [RestitutionModel.constant(0.5), RestitutionModel.viscoelastic(0.12)],
        ids=lambda m: m.kind.value,
    )
    def test_inelastic_steps_never_heat(self, small_config, model):
        ensemble = init_ensemble(small_config(n_particles=1000, restitution=model))
        energy = ensemble.mean_energy()
        for _ in range(2000):
            step(ensemble, 0.01, model)
            current = ensemble.mean_energy()
            assert current <= energy * (1.0 + 1e-13)
            energy = current
        assert energy < 1.0

    def test_accepted_collisions_follow_mean_relative_speed(self, small_config, elastic):
        ensemble = init_ensemble(small_config(n_particles=2000, restitution=elastic, seed=11))
        dt = 0.01
        expected = 0.0
        for _ in range(40):
            mean_speed = float(pdist(ensemble.velocities).mean())
            for _ in range(50):
                step(ensemble, dt, elastic)
            expected += 50 * 0.5 * ensemble.n_particles * dt * mean_speed
        assert ensemble.n_collisions == pytest.approx(expected, rel=0.02)

    def test_condensed_ensemble_is_a_fixed_point(self, constant_half):
        ensemble = ensemble_of(np.zeros((10, 3)))
        step(ensemble, 0.5, constant_half)
        assert ensemble.t == 0.5
        assert ensemble.n_collisions == 0
        assert majorant(ensemble) == 0.0

    def test_self_similar_step_advances_tau(self, constant_half, rng):
        ensemble = ensemble_of(rng.standard_normal((50, 3)), rng, mode=SimMode.SELF_SIMILAR)
        step(ensemble, 0.25, constant_half)
        assert ensemble.tau == 0.25
        assert ensemble.t == 0.0

    def test_step_rejects_nonpositive_dt(self, constant_half, rng):
        with pytest.raises(ValueError):
            step(ensemble_of(rng.standard_normal((4, 3))), 0.0, constant_half)

    def test_tabulated_kernel_step_conserves_momentum(self, small_config, constant_half):
        s = np.linspace(-1.0, 1.0, 11)
        kernel = TabulatedKernel(s, 1.0 + 2.0 * np.maximum(s, 0.0))
        ensemble = init_ensemble(small_config(n_particles=1000))
        for _ in range(500):
            step(ensemble, 0.01, constant_half, kernel)
        mean_speed = np.mean(np.linalg.norm(ensemble.velocities, axis=1))
        assert np.all(np.abs(ensemble.total_momentum()) <= 1e-11 * 1000 * mean_speed)
        assert ensemble.mean_energy() < 1.0


class TestObservables:
    def test_moments_examples(self, rng):
        zero = moments(ensemble_of(np.zeros((5, 3))), [0.0, 0.5, 2.0])
        assert zero[0.0] == 1.0
        assert zero[0.5] == 0.0
        assert zero[2.0] == 0.0

        unit = ensemble_of(np.tile([0.0, 0.6, 0.8], (7, 1)))
        values = moments(unit, [0.5, 1.0, 3.0])
        for p in (0.5, 1.0, 3.0):
            assert values[p] == pytest.approx(1.0, rel=1e-12)

        with pytest.raises(ValueError):
            moments(unit, [])
        with pytest.raises(ValueError):
            moments(unit, [-0.5])

    def test_maxwellian_moment(self, small_config):
        ensemble = init_ensemble(small_config(n_particles=200_000))
        assert moments(ensemble, [2.0])[2.0] == pytest.approx(maxwellian_moment(2.0), rel=0.02)

    def test_tail_functional(self, caplog):
        unit = ensemble_of(np.tile([1.0, 0.0, 0.0], (4, 1)))
        assert tail_functional(unit, 1.0) == pytest.approx(math.e)
        assert tail_functional(unit, 0.0) == 1.0
        assert tail_functional(unit, 1.0, 2.0, physical_scale=2.0) == pytest.approx(math.exp(4.0))
        fast = ensemble_of(np.tile([1000.0, 0.0, 0.0], (4, 1)))
        assert math.isinf(tail_functional(fast, 1.0))
        assert "overflowed" in caplog.text
        with pytest.raises(ValueError):
            tail_functional(unit, -1.0)

    def test_tail_functional_is_bounded_by_the_largest_speed(self, small_config):
        ensemble = init_ensemble(small_config())
        largest = math.sqrt(ensemble.squared_speeds().max())
        assert 1.0 < tail_functional(ensemble, 0.5) <= math.exp(0.5 * largest)

    def test_rate_vanishes_for_elastic_collisions(self, small_config, elastic):
        ensemble = init_ensemble(small_config())
        estimate = dissipation_rate_estimate(ensemble, elastic)
        assert estimate.rate == 0.0

    def test_rate_exceeds_psi_of_the_energy(self, small_config, constant_half):
        ensemble = init_ensemble(small_config(n_particles=20_000))
        estimate = dissipation_rate_estimate(ensemble, constant_half, n_pairs=20_000)
        floor = psi(PsiProfile(constant_half), ensemble.mean_energy())
        assert estimate.rate >= floor - 3.0 * estimate.stderr

    def test_rate_matches_energy_loss(self, small_config, constant_half):
        ensemble = init_ensemble(small_config(n_particles=100_000, seed=3))
        estimator = np.random.default_rng(8)
        start = dissipation_rate_estimate(ensemble, constant_half, 100_000, rng=estimator)
        energy = ensemble.mean_energy()
        for _ in range(50):
            step(ensemble, 0.002, constant_half)
        end = dissipation_rate_estimate(ensemble, constant_half, 100_000, rng=estimator)
        observed = (energy - ensemble.mean_energy()) / 0.1
        assert observed == pytest.approx(0.5 * (start.rate + end.rate), rel=0.08)

    @pytest.mark.parametrize("kind", ["maxwellian", "two-temperature"])
    def test_fourth_moment_production_stays_below_its_bound(
        self, small_config, constant_half, kind
    ):
        orders = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5]
        initial = InitialCondition(kind=kind, ratio=4.0)
        config = small_config(n_particles=20_000, initial=initial)
        rates, starts = [], []
        for child in np.random.SeedSequence(17).spawn(8):
            ensemble = init_ensemble(config, child)
            before = moments(ensemble, orders)
            for _ in range(5):
                step(ensemble, 0.01, constant_half)
            after = moments(ensemble, [2.0])
            rates.append((after[2.0] - before[2.0]) / 0.05)
            starts.append([before[p] for p in orders])

        rates = np.array(rates)
        stderr = rates.std(ddof=1) / math.sqrt(len(rates))
        averaged = MomentVector(dict(zip(orders, np.mean(starts, axis=0))))
        assert rates.mean() <= moment_rhs(averaged, 2.0) + 3.0 * stderr

    def test_rate_needs_enough_pairs(self, small_config, constant_half):
        with pytest.raises(ValueError):
            dissipation_rate_estimate(init_ensemble(small_config()), constant_half, n_pairs=10)


class TestSimulate:
    def test_physical_run_records(self, small_config):
        series = simulate(small_config())
        assert len(series) == 11
        np.testing.assert_allclose(series.t, np.linspace(0.0, 1.0, 11), atol=1e-15)
        assert series.t[-1] == 1.0
        energy = series.column("E")
        assert energy[0] == pytest.approx(1.0, rel=1e-12)
        assert np.all(np.diff(energy) <= 0.0)
        assert np.all(np.diff(series.column("ncoll")) >= 0.0)
        np.testing.assert_allclose(series.column("theta"), energy * (1.0 + series.t) ** 2)

    def test_runs_are_reproducible(self, small_config):
        assert csv_text(simulate(small_config(seed=5))) == csv_text(simulate(small_config(seed=5)))

    def test_elastic_run_keeps_its_energy(self, small_config, elastic):
        series = simulate(small_config(restitution=elastic))
        np.testing.assert_allclose(series.column("E"), 1.0, rtol=1e-10)

    def test_tail_column(self, small_config):
        series = simulate(small_config(tail=TailParams(r=0.1)))
        assert series.has_tail
        assert np.all(series.column("tail") > 1.0)

    def test_self_similar_run(self, small_config, viscoelastic):
        config = small_config(restitution=viscoelastic, mode="selfsimilar", t_end=2.0)
        series = simulate(config)
        params = ScalingParams(viscoelastic)
        np.testing.assert_allclose(series.tau, tau_of_t(params, series.t), rtol=1e-10)
        scale = velocity_scale(params, series.t)
        np.testing.assert_allclose(series.column("theta"), series.column("E") * scale**2)
        assert series.column("E")[-1] < 1.0

    def test_frames_agree_on_the_energy(self, small_config):
        physical = simulate(small_config(n_particles=10_000, seed=21))
        rescaled = simulate(small_config(n_particles=10_000, seed=22, mode="selfsimilar"))
        assert rescaled.column("E")[-1] == pytest.approx(physical.column("E")[-1], rel=0.03)

    def test_single_replica_is_simulate(self, small_config):
        results, merged = run_replicas(small_config(), replicas=1)
        assert merged is results[0]
        assert csv_text(merged) == csv_text(simulate(small_config()))

    def test_replicas_merge_in_order(self, small_config):
        config = small_config(n_particles=500)
        results, merged = run_replicas(config, replicas=3, max_workers=2)
        assert len(results) == 3
        child = np.random.SeedSequence(config.seed).spawn(3)[1]
        assert csv_text(results[1]) == csv_text(simulate(config, child))
        stacked = np.array([series.column("E") for series in results])
        np.testing.assert_allclose(merged.column("E"), stacked.mean(axis=0))
        assert np.all(merged.column("E_se")[1:] > 0.0)
        with pytest.raises(ConfigError):
            run_replicas(config, replicas=0)
