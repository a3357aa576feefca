from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

SCHEMA_VERSION = "v1"


@dataclass
class Table:
    columns: list[str]
    rows: list[Sequence[Any]] = field(default_factory=list)

    def add_row(self, *values: Any) -> None:
        if len(values) != len(self.columns):
            raise ValueError(f"row of {len(values)} values for {len(self.columns)} columns")
        self.rows.append(values)


def _format(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return "%.12e" % value
    if value is None:
        return ""
    return str(value)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, Path):
        return str(value)
    return value


class ResultStore:
    """Writes one experiment's tables and JSON artefacts under ``out_dir`` with a shared stem."""

    def __init__(self, out_dir: Path, experiment: str, stem: str | None = None):
        self.out_dir = Path(out_dir)
        self.experiment = experiment
        self.stem = stem or experiment
        self.written: list[Path] = []

    def _path(self, name: str | None, suffix: str) -> Path:
        base = self.stem if not name else f"{self.stem}.{name}"
        return self.out_dir / f"{base}{suffix}"

    def _replace(self, path: Path, write) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(path.suffix + ".tmp")
        with tmp.open("w", encoding="utf-8", newline="") as f:
            write(f)
        tmp.replace(path)
        self.written.append(path)
        return path

    def write_table(self, table: Table, name: str | None = None) -> Path:
        schema = f"clusterchain/{self.experiment}" + (f"/{name}" if name else "") + f"/{SCHEMA_VERSION}"

        def write(f) -> None:
            f.write(f"# schema: {schema}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(table.columns)
            for row in table.rows:
                writer.writerow([_format(v) for v in row])

        return self._replace(self._path(name, ".csv"), write)

    def write_json(self, data: Any, name: str) -> Path:
        def write(f) -> None:
            json.dump(_jsonable(data), f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")

        return self._replace(self._path(name, ".json"), write)

    def write_sidecar(self, resolved_config: dict) -> Path:
        return self.write_json(resolved_config, "config")


def read_table(path: Path) -> tuple[str, list[str], list[list[str]]]:
    """(schema, columns, rows) of a table written by ResultStore."""
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        schema = f.readline().removeprefix("# schema:").strip()
        rows: Iterable[list[str]] = csv.reader(f)
        columns, *body = list(rows)
    return schema, columns, body
