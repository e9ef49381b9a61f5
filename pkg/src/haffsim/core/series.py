"""
Moment Series

Time-indexed records of a simulation (energies, moments, tail functional,
collision counts), their CSV representation and the merge of independent
replicas.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from haffsim.core.ensemble import SimMode
from haffsim.core.errors import ConfigError

logger = logging.getLogger(__name__)

BASE_COLUMNS = ("t", "tau", "E", "theta")
ERROR_COLUMNS = ("E_se", "theta_se")


def moment_column(p: float) -> str:
    return f"m_{p:g}"


def format_value(value: float) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.17g}"


@dataclass
class MomentSeries:
    """
    Records of one run (or the average of several replicas).

    In self-similar mode the moment and tail columns refer to the rescaled
    velocities; ``E`` is always the physical energy and ``theta`` the rescaled one.
    """

    moment_orders: Tuple[float, ...]
    mode: SimMode = SimMode.PHYSICAL
    has_tail: bool = False
    replicas: int = 1
    columns: Dict[str, List[float]] = field(default_factory=dict)

    def __post_init__(self):
        self.moment_orders = tuple(float(p) for p in self.moment_orders)
        for name in self.column_names(include_errors=True):
            self.columns.setdefault(name, [])

    def column_names(self, include_errors: Optional[bool] = None) -> List[str]:
        """Column order as written to CSV."""
        if include_errors is None:
            include_errors = self.replicas > 1
        names = list(BASE_COLUMNS) + [moment_column(p) for p in self.moment_orders]
        if self.has_tail:
            names.append("tail")
        names.append("ncoll")
        if include_errors:
            names.extend(ERROR_COLUMNS)
        return names

    def append(self, record: Dict[str, float]) -> None:
        for name in self.column_names(include_errors=True):
            self.columns[name].append(record[name])

    def __len__(self) -> int:
        return len(self.columns["t"])

    def column(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise KeyError(f"series has no column '{name}'")
        return np.asarray(self.columns[name], dtype=float)

    def moment(self, p: float) -> np.ndarray:
        return self.column(moment_column(p))

    @property
    def t(self) -> np.ndarray:
        return self.column("t")

    @property
    def tau(self) -> np.ndarray:
        return self.column("tau")

    def moment_energy(self) -> np.ndarray:
        """The energy of the frame the moments were measured in."""
        return self.column("theta" if self.mode is SimMode.SELF_SIMILAR else "E")

    def moment_energy_se(self) -> np.ndarray:
        return self.column("theta_se" if self.mode is SimMode.SELF_SIMILAR else "E_se")

    def rows(self, include_errors: Optional[bool] = None) -> Iterable[List[float]]:
        names = self.column_names(include_errors)
        for index in range(len(self)):
            yield [self.columns[name][index] for name in names]

    def write_csv(self, stream: TextIO, include_errors: Optional[bool] = None) -> None:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(self.column_names(include_errors))
        for row in self.rows(include_errors):
            writer.writerow([format_value(value) for value in row])

    def to_csv(self, path: Union[str, Path], include_errors: Optional[bool] = None) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            self.write_csv(handle, include_errors)
        logger.info("Wrote %d records to %s", len(self), path)

    @classmethod
    def from_csv(
        cls, path: Union[str, Path], mode: SimMode = SimMode.PHYSICAL
    ) -> "MomentSeries":
        """Read a series written by :meth:`to_csv`.

        Raises:
            ConfigError: If the file is missing or lacks the base columns.
        """
        try:
            with open(path, "r", encoding="utf-8", newline="") as handle:
                reader = csv.DictReader(handle)
                header = reader.fieldnames or []
                rows = list(reader)
        except OSError as exc:
            raise ConfigError(f"cannot read series '{path}': {exc}") from exc

        missing = [name for name in BASE_COLUMNS + ("ncoll",) if name not in header]
        if missing:
            raise ConfigError(f"series '{path}' lacks columns: {', '.join(missing)}")
        orders = tuple(float(name[2:]) for name in header if name.startswith("m_"))
        series = cls(moment_orders=orders, mode=mode, has_tail="tail" in header)
        if "E_se" not in header:
            for name in ERROR_COLUMNS:
                series.columns[name] = [math.nan] * len(rows)
        else:
            series.replicas = 2
        for name in header:
            series.columns[name] = [float(row[name]) for row in rows]
        return series

    @classmethod
    def merge(cls, replicas: Sequence["MomentSeries"]) -> "MomentSeries":
        """Average replicas record by record, in the order given.

        ``E_se``/``theta_se`` become standard errors across replicas.
        """
        if not replicas:
            raise ValueError("nothing to merge")
        first = replicas[0]
        if len(replicas) == 1:
            return first
        for other in replicas[1:]:
            if other.moment_orders != first.moment_orders or len(other) != len(first):
                raise ValueError("replicas must share moment orders and record schedule")

        merged = cls(
            moment_orders=first.moment_orders,
            mode=first.mode,
            has_tail=first.has_tail,
            replicas=len(replicas),
        )
        count = len(replicas)
        for name in first.column_names(include_errors=False):
            stacked = np.array([replica.column(name) for replica in replicas])
            merged.columns[name] = list(stacked.mean(axis=0))
        for name, source in (("E_se", "E"), ("theta_se", "theta")):
            stacked = np.array([replica.column(source) for replica in replicas])
            merged.columns[name] = list(stacked.std(axis=0, ddof=1) / math.sqrt(count))
        merged.columns["t"] = list(first.column("t"))
        merged.columns["tau"] = list(first.column("tau"))
        return merged
