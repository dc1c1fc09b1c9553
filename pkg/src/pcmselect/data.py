"""Datasets and the treatment/outcome/covariate/mediator role partition."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigInvalid
from .linalg import StandardizationRecord, as_matrix, standardize

__all__ = ["RolePartition", "Dataset"]


@dataclass(frozen=True)
class RolePartition:
    """Column roles for total-effect estimation.

    x, y : treatment and response columns.
    z    : covariates fixed by prior knowledge (never penalized).
    zbar : candidate covariates subject to selection.
    s    : mediators fixed by prior knowledge (never penalized).
    sbar : candidate mediators subject to selection.

    The six groups must be pairwise disjoint; any of the four set-valued
    groups may be empty.
    """

    x: str
    y: str
    z: tuple[str, ...] = ()
    zbar: tuple[str, ...] = ()
    s: tuple[str, ...] = ()
    sbar: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))
        object.__setattr__(self, "zbar", tuple(self.zbar))
        object.__setattr__(self, "s", tuple(self.s))
        object.__setattr__(self, "sbar", tuple(self.sbar))
        groups = [(self.x,), (self.y,), self.z, self.zbar, self.s, self.sbar]
        flat = [name for g in groups for name in g]
        if len(set(flat)) != len(flat):
            raise ConfigInvalid("role groups must be pairwise disjoint")

    @property
    def covariates(self) -> tuple[str, ...]:
        return self.z + self.zbar

    @property
    def mediators(self) -> tuple[str, ...]:
        return self.s + self.sbar

    def required_columns(self) -> tuple[str, ...]:
        return (self.x, self.y) + self.covariates + self.mediators

    @staticmethod
    def from_dict(payload: dict) -> "RolePartition":
        try:
            return RolePartition(
                x=payload["x"],
                y=payload["y"],
                z=tuple(payload.get("z", ())),
                zbar=tuple(payload.get("zbar", ())),
                s=tuple(payload.get("s", ())),
                sbar=tuple(payload.get("sbar", ())),
            )
        except KeyError as exc:
            raise ConfigInvalid(f"roles config is missing field {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "x": self.x,
            "y": self.y,
            "z": list(self.z),
            "zbar": list(self.zbar),
            "s": list(self.s),
            "sbar": list(self.sbar),
        }


@dataclass(frozen=True)
class Dataset:
    """A named-column observation matrix, usually standardized.

    ``record`` carries the standardization applied to the raw data (None for
    data constructed directly on the standardized scale).
    """

    values: np.ndarray
    columns: tuple[str, ...]
    record: StandardizationRecord | None = field(default=None)

    def __post_init__(self):
        values = as_matrix(self.values, "dataset")
        if values.shape[1] != len(self.columns):
            raise ValueError(
                f"{values.shape[1]} columns of data vs {len(self.columns)} names"
            )
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "columns", tuple(self.columns))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def index_of(self, names) -> np.ndarray:
        lookup = {c: i for i, c in enumerate(self.columns)}
        try:
            return np.array([lookup[n] for n in names], dtype=int)
        except KeyError as exc:
            raise ConfigInvalid(f"column {exc} not present in dataset") from exc

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.index_of([name])[0]]

    def standardized(self) -> "Dataset":
        values, record = standardize(self.values, self.columns)
        return Dataset(values, self.columns, record)

    def check_roles(self, roles: RolePartition) -> None:
        missing = [c for c in roles.required_columns() if c not in self.columns]
        if missing:
            raise ConfigInvalid(f"dataset lacks role columns: {missing}")
