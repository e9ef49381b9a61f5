"""
Run Configuration

Parsing of flat ``key = value`` run files, packaged presets and the
environment settings read through python-dotenv.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from dotenv import load_dotenv

from haffsim.core.dsmc import (
    InitialCondition,
    RecordSchedule,
    SimConfig,
    TailParams,
)
from haffsim.core.errors import ConfigError
from haffsim.core.kernels import IsotropicKernel, TabulatedKernel
from haffsim.core.restitution import RestitutionModel

load_dotenv()
logger = logging.getLogger(__name__)

PRESETS_PATH = Path(__file__).parent.parent / "config" / "presets.json"
REQUIRED_KEYS = ("restitution.kind", "particles.n", "time.t_end")


@dataclass(frozen=True)
class KeySpec:
    """Type and default of one configuration key."""

    kind: str
    default: Any = None
    choices: Tuple[str, ...] = ()


KEY_SPECS: Dict[str, KeySpec] = {
    "restitution.kind": KeySpec("choice", choices=("constant", "monotone", "viscoelastic")),
    "restitution.e0": KeySpec("float"),
    "restitution.a": KeySpec("float"),
    "restitution.eta": KeySpec("float"),
    "particles.n": KeySpec("int"),
    "time.t_end": KeySpec("float"),
    "time.target": KeySpec("float", 0.05),
    "initial.kind": KeySpec(
        "choice", "maxwellian", choices=("maxwellian", "two-temperature", "file")
    ),
    "initial.energy": KeySpec("float", 1.0),
    "initial.ratio": KeySpec("float", 4.0),
    "initial.file": KeySpec("str"),
    "record.kind": KeySpec("choice", "log", choices=("log", "linear")),
    "record.count": KeySpec("int", 48),
    "record.t_min": KeySpec("float", 0.1),
    "record.dt": KeySpec("float"),
    "mode": KeySpec("choice", "physical", choices=("physical", "selfsimilar")),
    "moment_orders": KeySpec("floats", (0.5, 1.5, 2.0, 3.0)),
    "tail.r": KeySpec("float"),
    "tail.s": KeySpec("float"),
    "kernel.file": KeySpec("str"),
    "seed": KeySpec("int", 0),
    "replicas": KeySpec("int", 1),
    "output.path": KeySpec("str", "series.csv"),
    "check.tolerance": KeySpec("float", 0.15),
    "check.band": KeySpec("window"),
    "check.window": KeySpec("window"),
}


def _convert(key: str, raw: str, line: int) -> Any:
    spec = KEY_SPECS[key]
    try:
        if spec.kind == "int":
            return int(raw)
        if spec.kind == "float":
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        if spec.kind in ("floats", "window"):
            values = tuple(float(item) for item in raw.split(",") if item.strip())
            if not values or not all(math.isfinite(v) for v in values):
                raise ValueError(raw)
            if spec.kind == "window" and len(values) != 2:
                raise ValueError(raw)
            return values
    except ValueError as exc:
        expected = {"floats": "a comma-separated list of floats", "window": "two floats lo,hi"}
        raise ConfigError(
            f"key '{key}' expects {expected.get(spec.kind, spec.kind)}, got '{raw}' (line {line})"
        ) from exc
    if spec.kind == "choice" and raw not in spec.choices:
        raise ConfigError(
            f"key '{key}' must be one of {', '.join(spec.choices)}, got '{raw}' (line {line})"
        )
    return raw


def _format(value: Any) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    """
    A parsed run configuration.

    Attributes:
        sim: The simulation settings.
        values: Every key with its typed value, defaults filled in.
        output_path: Where ``simulate`` writes the series.
        replicas: Number of independent replicas.
        check_tolerance: Half-width of the exponent band of ``haff-check``.
        check_band: Explicit exponent band lo,hi; overrides the tolerance.
        check_window: Fit window, or None for the last two decades.
    """

    sim: SimConfig
    values: Dict[str, Any] = field(default_factory=dict)
    output_path: str = "series.csv"
    replicas: int = 1
    check_tolerance: float = 0.15
    check_band: Optional[Tuple[float, float]] = None
    check_window: Optional[Tuple[float, float]] = None

    def to_text(self) -> str:
        """Render the resolved configuration; parsing the result gives the same run."""
        lines = [
            f"{key} = {_format(self.values[key])}"
            for key in KEY_SPECS
            if self.values.get(key) is not None
        ]
        return "\n".join(lines) + "\n"

    def with_overrides(
        self,
        seed: Optional[int] = None,
        replicas: Optional[int] = None,
        output_path: Optional[str] = None,
    ) -> "RunConfig":
        """Apply command-line overrides."""
        values = dict(self.values)
        for key, value in (("seed", seed), ("replicas", replicas), ("output.path", output_path)):
            if value is not None:
                values[key] = value
        return build_run_config(values)

    def exponent_band(self, target: float) -> Tuple[float, float]:
        """The accepted range of the fitted exponent."""
        if self.check_band is not None:
            return self.check_band
        return (target - self.check_tolerance, target + self.check_tolerance)


def build_run_config(values: Dict[str, Any]) -> RunConfig:
    """Validate typed values and assemble the run configuration.

    Raises:
        ConfigError: On missing keys or invalid parameter combinations.
    """
    for key in REQUIRED_KEYS:
        if values.get(key) is None:
            raise ConfigError(f"missing required key '{key}'")
    resolved = {key: values.get(key, spec.default) for key, spec in KEY_SPECS.items()}

    restitution = RestitutionModel.from_params(
        resolved["restitution.kind"],
        e0=resolved["restitution.e0"],
        a=resolved["restitution.a"],
        eta=resolved["restitution.eta"],
    )
    tail = None
    if resolved["tail.r"] is not None:
        tail = TailParams(r=resolved["tail.r"], s=resolved["tail.s"] or 1.0)
    elif resolved["tail.s"] is not None:
        raise ConfigError("key 'tail.s' requires 'tail.r'")
    kernel = (
        TabulatedKernel.from_file(resolved["kernel.file"])
        if resolved["kernel.file"]
        else IsotropicKernel()
    )
    if resolved["replicas"] < 1:
        raise ConfigError("key 'replicas' must be at least 1")
    band = resolved["check.band"]
    if band is not None and not band[0] < band[1]:
        raise ConfigError("key 'check.band' needs lo < hi")

    sim = SimConfig(
        n_particles=resolved["particles.n"],
        restitution=restitution,
        t_end=resolved["time.t_end"],
        initial=InitialCondition(
            kind=resolved["initial.kind"],
            energy=resolved["initial.energy"],
            ratio=resolved["initial.ratio"],
            path=resolved["initial.file"],
        ),
        coll_per_particle_per_step=resolved["time.target"],
        record=RecordSchedule(
            kind=resolved["record.kind"],
            count=resolved["record.count"],
            t_min=resolved["record.t_min"],
            dt=resolved["record.dt"],
        ),
        mode=resolved["mode"],
        moment_orders=resolved["moment_orders"],
        tail=tail,
        seed=resolved["seed"],
        kernel=kernel,
    )
    return RunConfig(
        sim=sim,
        values=resolved,
        output_path=resolved["output.path"],
        replicas=resolved["replicas"],
        check_tolerance=resolved["check.tolerance"],
        check_band=resolved["check.band"],
        check_window=resolved["check.window"],
    )


def parse_config(text: str) -> RunConfig:
    """Parse ``key = value`` lines (``#`` starts a comment) into a RunConfig.

    Raises:
        ConfigError: On malformed lines, unknown or duplicate keys, type
            mismatches, missing required keys and invalid parameters.
    """
    values: Dict[str, Any] = {}
    seen: Dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"line {number}: expected 'key = value', got '{content}'")
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in KEY_SPECS:
            raise ConfigError(f"unknown key '{key}' (line {number})")
        if key in seen:
            raise ConfigError(f"duplicate key '{key}' on lines {seen[key]} and {number}")
        seen[key] = number
        values[key] = _convert(key, raw, number)
    return build_run_config(values)


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and parse a run file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config '{path}': {exc}") from exc
    logger.info("Loaded run configuration from %s", path)
    return parse_config(text)


def load_presets() -> Dict[str, Dict]:
    """Load the packaged presets."""
    try:
        with open(PRESETS_PATH, "r", encoding="utf-8") as file:
            return json.load(file)["presets"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot load presets from {PRESETS_PATH}: {exc}") from exc


def preset_names() -> List[str]:
    return sorted(load_presets())


def preset_text(name: str) -> str:
    """The run file equivalent to a preset."""
    presets = load_presets()
    if name not in presets:
        raise ConfigError(f"unknown preset '{name}' (known: {', '.join(sorted(presets))})")
    entries = presets[name]["config"]
    return "".join(f"{key} = {value}\n" for key, value in entries.items())


def preset_config(name: str) -> RunConfig:
    return parse_config(preset_text(name))


def worker_limit() -> Optional[int]:
    """Replica pool cap from ``HAFFSIM_THREADS``."""
    raw = os.getenv("HAFFSIM_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"HAFFSIM_THREADS must be an integer, got '{raw}'") from exc
    if value < 1:
        raise ConfigError("HAFFSIM_THREADS must be at least 1")
    return value


def default_log_level() -> int:
    """Log level from ``HAFFSIM_LOG_LEVEL``, INFO when unset or unknown."""
    name = os.getenv("HAFFSIM_LOG_LEVEL", "INFO").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO
