"""Tests for run-file parsing, presets and environment settings."""

import logging
import math

import pytest

from haffsim.cli.config import (
    build_run_config,
    default_log_level,
    load_config,
    load_presets,
    parse_config,
    preset_config,
    preset_names,
    preset_text,
    worker_limit,
)
from haffsim.core.dsmc import InitialKind, RecordKind
from haffsim.core.ensemble import SimMode
from haffsim.core.errors import ConfigError
from haffsim.core.kernels import IsotropicKernel, TabulatedKernel
from haffsim.core.restitution import RestitutionKind

MINIMAL = """\
# smallest valid run
restitution.kind = constant
restitution.e0 = 0.5
particles.n = 1000
time.t_end = 10
"""


def test_minimal_config_gets_defaults():
    run_config = parse_config(MINIMAL)
    sim = run_config.sim
    assert sim.restitution.kind is RestitutionKind.CONSTANT
    assert sim.restitution.e0 == 0.5
    assert sim.n_particles == 1000
    assert sim.t_end == 10.0
    assert sim.coll_per_particle_per_step == 0.05
    assert sim.initial.kind is InitialKind.MAXWELLIAN
    assert sim.record.kind is RecordKind.LOG
    assert sim.record.count == 48
    assert sim.mode is SimMode.PHYSICAL
    assert sim.moment_orders == (0.5, 1.5, 2.0, 3.0)
    assert sim.tail is None
    assert sim.seed == 0
    assert isinstance(sim.kernel, IsotropicKernel)
    assert run_config.replicas == 1
    assert run_config.output_path == "series.csv"
    assert run_config.check_tolerance == 0.15
    assert run_config.check_window is None


def test_full_config():
    text = MINIMAL.replace("constant", "viscoelastic").replace("restitution.e0 = 0.5", "")
    text += """
restitution.a = 0.12   # material constant
mode = selfsimilar
moment_orders = 0.5, 1, 2, 4
tail.r = 0.05
record.kind = linear
record.dt = 0.5
seed = 9
replicas = 4
check.window = 1,10
"""
    run_config = parse_config(text)
    sim = run_config.sim
    assert sim.restitution.kind is RestitutionKind.VISCOELASTIC
    assert sim.restitution.a == 0.12
    assert sim.mode is SimMode.SELF_SIMILAR
    assert sim.moment_orders == (0.5, 1.0, 2.0, 4.0)
    assert sim.tail.r == 0.05
    assert sim.tail.s == 1.0
    assert sim.record.dt == 0.5
    assert sim.seed == 9
    assert run_config.replicas == 4
    assert run_config.check_window == (1.0, 10.0)


def test_to_text_round_trips():
    run_config = parse_config(MINIMAL + "seed = 3\ncheck.window = 2,8\n")
    again = parse_config(run_config.to_text())
    assert again.values == run_config.values
    assert again.to_text() == run_config.to_text()


def test_overrides():
    run_config = parse_config(MINIMAL).with_overrides(seed=11, replicas=2, output_path="x.csv")
    assert run_config.sim.seed == 11
    assert run_config.replicas == 2
    assert run_config.output_path == "x.csv"
    assert parse_config(MINIMAL).with_overrides().values == parse_config(MINIMAL).values


@pytest.mark.parametrize(
    "text, message",
    [
        (MINIMAL + "colour = blue\n", "unknown key 'colour' (line 6)"),
        (MINIMAL + "particles.n = 20\n", "duplicate key 'particles.n' on lines 4 and 6"),
        (MINIMAL.replace("1000", "many"), "key 'particles.n' expects int"),
        (MINIMAL + "mode = sideways\n", "must be one of physical, selfsimilar"),
        (MINIMAL + "check.window = 1\n", "two floats"),
        (MINIMAL + "just some words\n", "line 6"),
        (MINIMAL.replace("time.t_end = 10\n", ""), "missing required key 'time.t_end'"),
        (MINIMAL.replace("restitution.e0 = 0.5\n", ""), "restitution.e0"),
        (MINIMAL + "tail.s = 2\n", "tail.s"),
        (MINIMAL.replace("0.5", "1.5"), "restitution.e0"),
        (MINIMAL + "time.t_end_typo = 1\n", "unknown key"),
        (MINIMAL + "replicas = 0\n", "replicas"),
    ],
)
def test_config_errors(text, message):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert message in str(info.value)


def test_non_finite_values_are_rejected():
    with pytest.raises(ConfigError):
        parse_config(MINIMAL + "time.target = nan\n")


def test_load_config_from_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(MINIMAL, encoding="utf-8")
    assert load_config(path).sim.n_particles == 1000
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_kernel_file_is_loaded(tmp_path):
    kernel_path = tmp_path / "b.dat"
    kernel_path.write_text("-1 1\n0 1\n1 3\n", encoding="utf-8")
    run_config = parse_config(MINIMAL + f"kernel.file = {kernel_path}\n")
    assert isinstance(run_config.sim.kernel, TabulatedKernel)


def test_presets():
    names = preset_names()
    assert names == sorted(load_presets())
    for expected in (
        "constant-e05",
        "constant-e09",
        "monotone-a1-eta1",
        "viscoelastic-a012",
        "viscoelastic-a012-selfsim",
    ):
        assert expected in names
    for name in names:
        run_config = preset_config(name)
        assert run_config.sim.n_particles == 50_000
        assert run_config.check_window is not None
    selfsim = preset_config("viscoelastic-a012-selfsim").sim
    assert selfsim.mode is SimMode.SELF_SIMILAR
    assert max(selfsim.moment_orders) >= 4.0
    assert selfsim.tail is not None
    assert "restitution.kind = constant" in preset_text("constant-e05")
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_text("nope")


@pytest.mark.parametrize(
    "name, band",
    [
        ("constant-e05", (-2.15, -1.85)),
        ("constant-e09", (-2.15, -1.85)),
        ("monotone-a1-eta1", (-1.15, -0.85)),
        ("viscoelastic-a012", (-1.82, -1.52)),
        ("viscoelastic-a012-selfsim", (-1.82, -1.52)),
    ],
)
def test_preset_exponent_bands_are_exact(name, band):
    run_config = preset_config(name)
    target = -2.0 / (1.0 + run_config.sim.restitution.gamma)
    assert run_config.exponent_band(target) == band


def test_exponent_band_defaults_to_tolerance():
    run_config = parse_config(MINIMAL + "check.tolerance = 0.25\n")
    assert run_config.check_band is None
    assert run_config.exponent_band(-2.0) == pytest.approx((-2.25, -1.75))

    banded = parse_config(MINIMAL + "check.tolerance = 0.25\ncheck.band = -1.9,-1.6\n")
    assert banded.exponent_band(-2.0) == (-1.9, -1.6)
    assert parse_config(banded.to_text()).check_band == (-1.9, -1.6)

    with pytest.raises(ConfigError, match="lo < hi"):
        parse_config(MINIMAL + "check.band = -1.5,-1.8\n")


def test_worker_limit(monkeypatch):
    monkeypatch.delenv("HAFFSIM_THREADS", raising=False)
    assert worker_limit() is None
    monkeypatch.setenv("HAFFSIM_THREADS", "3")
    assert worker_limit() == 3
    monkeypatch.setenv("HAFFSIM_THREADS", "zero")
    with pytest.raises(ConfigError):
        worker_limit()
    monkeypatch.setenv("HAFFSIM_THREADS", "0")
    with pytest.raises(ConfigError):
        worker_limit()


def test_default_log_level(monkeypatch):
    monkeypatch.delenv("HAFFSIM_LOG_LEVEL", raising=False)
    assert default_log_level() == logging.INFO
    monkeypatch.setenv("HAFFSIM_LOG_LEVEL", "debug")
    assert default_log_level() == logging.DEBUG
    monkeypatch.setenv("HAFFSIM_LOG_LEVEL", "chatty")
    assert default_log_level() == logging.INFO


def test_build_run_config_requires_keys():
    with pytest.raises(ConfigError, match="restitution.kind"):
        build_run_config({"particles.n": 10, "time.t_end": 1.0})
    values = {
        "restitution.kind": "constant",
        "restitution.e0": 0.9,
        "particles.n": 10,
        "time.t_end": 2.0,
    }
    assert math.isclose(build_run_config(values).sim.t_end, 2.0)
