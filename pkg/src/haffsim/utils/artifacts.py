"""
Artifact Utilities

Helpers for the files a run leaves behind: column tables, the run manifest,
per-curve data files and the optional SVG chart.
"""

import json
import logging
import subprocess
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, TextIO, Union

import numpy as np

from haffsim import __version__
from haffsim.core.ensemble import SimMode
from haffsim.core.series import MomentSeries, format_value, moment_column

logger = logging.getLogger(__name__)


def version_string() -> str:
    """``git describe`` of the source tree, or the package version outside a checkout."""
    try:
        result = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        described = result.stdout.strip()
        if described:
            return described
    except (OSError, subprocess.SubprocessError):
        logger.debug("git describe unavailable, using the package version")
    return f"v{__version__}"


def write_columns(
    stream: TextIO, header: Sequence[str], rows: Iterable[Sequence[float]]
) -> None:
    """Whitespace-separated columns under a ``#`` header line."""
    stream.write("# " + " ".join(header) + "\n")
    for row in rows:
        stream.write(" ".join(format_value(value) for value in row) + "\n")


def manifest_path(series_path: Union[str, Path]) -> Path:
    path = Path(series_path)
    return path.with_name(path.stem + ".manifest.json")


def write_manifest(
    series_path: Union[str, Path],
    config_text: str,
    seed: int,
    replicas: int,
    extra: Optional[dict] = None,
) -> Path:
    """Write the manifest next to the series: config echo, seed, replicas, version."""
    manifest = {
        "version": version_string(),
        "seed": seed,
        "replicas": replicas,
        "series": Path(series_path).name,
        "config": config_text,
    }
    if extra:
        manifest.update(extra)
    path = manifest_path(series_path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, ensure_ascii=False)
    logger.info("Wrote run manifest to %s", path)
    return path


def read_manifest(series_path: Union[str, Path]) -> Optional[dict]:
    path = manifest_path(series_path)
    if not path.exists():
        return None
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_curves(series: MomentSeries, directory: Union[str, Path]) -> List[Path]:
    """One two-column (time, value) file per curve: E.dat, theta.dat, m_<p>.dat, tail.dat."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    time_name = "tau" if series.mode is SimMode.SELF_SIMILAR else "t"
    names = ["E", "theta"] + [moment_column(p) for p in series.moment_orders]
    if series.has_tail:
        names.append("tail")

    paths = []
    times = series.column(time_name)
    for name in names:
        path = directory / f"{name}.dat"
        with open(path, "w", encoding="utf-8", newline="") as f:
            write_columns(f, (time_name, name), zip(times, series.column(name)))
        paths.append(path)
    logger.info("Wrote %d curve files to %s", len(paths), directory)
    return paths


def plot_series(
    series: MomentSeries,
    path: Union[str, Path],
    bound: Optional[np.ndarray] = None,
    fit_line: Optional[np.ndarray] = None,
    envelope: Optional[np.ndarray] = None,
) -> Path:
    """Log-log chart of E(t) with the optional ODE bound, asymptotic envelope and fit."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t = series.t
    positive = t > 0.0
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.loglog(1.0 + t[positive], series.column("E")[positive], label="DSMC E(t)")
    if bound is not None:
        ax.loglog(1.0 + t[positive], np.asarray(bound)[positive], "--", label="upper bound")
    if envelope is not None:
        ax.loglog(
            1.0 + t[positive], np.asarray(envelope)[positive], "-.", label="asymptotic envelope"
        )
    if fit_line is not None:
        ax.loglog(1.0 + t[positive], np.asarray(fit_line)[positive], ":", label="power-law fit")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("E")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    logger.info("Wrote chart to %s", path)
    return Path(path)
