"""File formats: CSV datasets, JSON configs, edge-list graphs, model files.

CSV datasets carry a mandatory header row of column names.  Roles, parameter
sets, grids, and experiment configs are JSON documents; structural models are
JSON with vertex, edge/coefficient, variance, and correlated-block fields.
Floats are written with ``repr`` so files round-trip bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import Dataset
from .errors import ConfigInvalid, DataFormatError
from .experiment import McResult
from .graphs import Dag, format_edge_list, parse_edge_list
from .scm import CovarianceSpec, LinearScm

__all__ = [
    "read_dataset_csv",
    "write_dataset_csv",
    "load_json",
    "save_json",
    "load_graph",
    "save_graph",
    "load_scm",
    "save_scm",
    "write_summary_csv",
    "write_estimates_csv",
]


def read_dataset_csv(path) -> Dataset:
    """Read a comma-separated dataset with a header row of column names."""
    text = Path(path).read_text()
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataFormatError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if any(not c for c in header):
        raise DataFormatError(f"{path}: blank column name in header", row=1)
    rows = []
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != len(header):
            raise DataFormatError(
                f"{path}: expected {len(header)} cells, found {len(cells)}", row=i
            )
        parsed = []
        for j, cell in enumerate(cells, start=1):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataFormatError(
                    f"{path}: not a number: {cell.strip()!r}", row=i, column=j
                ) from None
        rows.append(parsed)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return Dataset(np.asarray(rows, dtype=float), header)


def write_dataset_csv(path, dataset: Dataset) -> None:
    lines = [",".join(dataset.columns)]
    for row in dataset.values:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON ({exc})") from exc


def save_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_graph(path) -> Dag:
    try:
        return parse_edge_list(Path(path).read_text())
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from exc


def save_graph(path, dag: Dag) -> None:
    Path(path).write_text(format_edge_list(dag))


def load_scm(path) -> tuple[LinearScm, CovarianceSpec | None]:
    payload = load_json(path)
    try:
        return LinearScm.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad structural model: {exc}") from exc


def save_scm(path, scm: LinearScm, spec: CovarianceSpec | None = None) -> None:
    save_json(path, scm.to_dict(spec))


def write_summary_csv(path, result: McResult) -> None:
    lines = ["method,mean,sd,bias,sign,failures,params"]
    for row in result.summaries:
        params = json.dumps(row.params, sort_keys=True).replace('"', "'")
        lines.append(
            ",".join(
                [
                    row.method,
                    repr(row.mean),
                    repr(row.sd),
                    repr(row.bias),
                    repr(row.sign),
                    str(row.failures),
                    f'"{params}"',
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_estimates_csv(path, result: McResult) -> None:
    lines = ["replication,method,estimate"]
    for rep, method, value in result.estimates:
        lines.append(f"{rep},{method},{repr(value)}")
    Path(path).write_text("\n".join(lines) + "\n")
