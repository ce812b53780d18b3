from __future__ import annotations

import csv
import logging
import numbers
import os
import typing as t

import numpy as np

from . import json
from .typing import CsvRow
from .version import __version__

logger = logging.getLogger(__name__)

PARAM_PREFIX = "param_"


def format_value(value: t.Any, float_format: str) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return format(float(value), float_format)
    if isinstance(value, numbers.Complex):
        return format(complex(value), float_format)
    if isinstance(value, (list, tuple, dict, np.ndarray)):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return str(value)


def parameter_echo(parameters: t.Mapping[str, t.Any], seed: int | None) -> dict[str, t.Any]:
    echo = {f"{PARAM_PREFIX}{key}": parameters[key] for key in sorted(parameters)}
    echo[f"{PARAM_PREFIX}seed"] = seed
    return echo


class CsvLedger:
    """CSV results with a single ``#`` header comment naming the version,
    experiment and config hash, then a column row and plain data rows.

    Every row carries the parameter echo columns. Nothing time-dependent
    is written, so equal configs give byte-identical files.
    """

    def __init__(self, path: str | os.PathLike[str], experiment: str, config_hash: str,
                 echo: t.Mapping[str, t.Any] | None = None, float_format: str = ".12g"):
        self.path = os.fspath(path)
        self.experiment = experiment
        self.config_hash = config_hash
        self.echo = dict(echo or {})
        self.float_format = float_format

    @property
    def header(self) -> str:
        return f"# restriction-lab {__version__} experiment={self.experiment} config={self.config_hash}"

    def columns(self, rows: t.Sequence[CsvRow]) -> list[str]:
        seen: dict[str, None] = {}
        for row in rows:
            for key in row:
                seen.setdefault(key, None)
        for key in self.echo:
            seen.setdefault(key, None)
        return list(seen)

    def write(self, rows: t.Iterable[CsvRow]) -> str:
        rows = list(rows)
        columns = self.columns(rows)
        with open(self.path, "w", newline="", encoding="utf-8") as fp:
            fp.write(self.header + "\n")
            writer = csv.writer(fp, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                merged = {**self.echo, **row}
                writer.writerow([format_value(merged.get(key), self.float_format) for key in columns])
        logger.debug(f"wrote {len(rows)} rows to {self.path}")
        return self.path


def read_ledger(path: str | os.PathLike[str]) -> tuple[str, list[dict[str, str]]]:
    """Header comment and the data rows as strings."""
    with open(path, newline="", encoding="utf-8") as fp:
        header = fp.readline().rstrip("\n")
        return header, list(csv.DictReader(fp))


def write_plot_data(path: str | os.PathLike[str], columns: t.Sequence[t.Sequence[float]],
                    float_format: str = ".12g") -> str:
    """Whitespace-separated columns, one sample per line."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    np.savetxt(path, data, fmt=f"%{float_format}")
    return os.fspath(path)
