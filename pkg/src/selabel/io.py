"""CSV ingestion and emission for selection-model datasets.

CSV convention: UTF-8, header row, '.' decimal, empty cell means "not
observed" and is legal only in the outcome column on unselected rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from selabel.errors import SchemaError
from selabel.model import Dataset

FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for a dataset file.

    ``selection_normalized``/``outcome_normalized`` are the columns whose
    coefficients are fixed to +/-1; ``*_sign`` applies that sign on load.
    """

    selection_normalized: str = "z0"
    outcome_normalized: str = "x0"
    selection_free: tuple = ()
    outcome_free: tuple = ()
    d: str = "D"
    y: str = "Y"
    selection_sign: float = 1.0
    outcome_sign: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "selection_free", tuple(self.selection_free))
        object.__setattr__(self, "outcome_free", tuple(self.outcome_free))
        for sign in (self.selection_sign, self.outcome_sign):
            if sign not in (1.0, -1.0):
                raise SchemaError("normalization signs must be +1 or -1")
        cols = self.columns
        if len(set(cols)) != len(cols):
            raise SchemaError("schema column names must be distinct")

    @property
    def columns(self) -> tuple:
        return (
            (self.selection_normalized,)
            + self.selection_free
            + (self.outcome_normalized,)
            + self.outcome_free
            + (self.d, self.y)
        )

    @staticmethod
    def default_for(p_z: int, p_x: int) -> "CsvSchema":
        return CsvSchema(
            selection_free=tuple(f"z{j + 1}" for j in range(p_z)),
            outcome_free=tuple(f"x{j + 1}" for j in range(p_x)),
        )


def _standardized(values: np.ndarray) -> np.ndarray:
    sd = values.std()
    if sd == 0.0:
        raise SchemaError("cannot standardize a constant column")
    return (values - values.mean()) / sd


def load_csv(path, schema: CsvSchema, standardize: bool = False) -> Dataset:
    """Read a dataset file, validating the D/Y observability contract.

    Row numbers in error messages count the header as row 1, so they match
    what a text editor displays.
    """
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in schema.columns if c not in frame.columns]
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")

    d = frame[schema.d].to_numpy(dtype=float)
    if not np.isin(d, (0.0, 1.0)).all():
        row = int(np.flatnonzero(~np.isin(d, (0.0, 1.0)))[0])
        raise SchemaError(f"non-binary D value at row {row + 2}")
    y = frame[schema.y].to_numpy(dtype=float)
    bad = np.flatnonzero(np.isnan(y) != (d == 0.0))
    if bad.size:
        row = int(bad[0])
        problem = "present" if d[row] == 0.0 else "missing"
        raise SchemaError(f"Y {problem} at row {row + 2} where D = {int(d[row])}")

    z0 = schema.selection_sign * frame[schema.selection_normalized].to_numpy(float)
    x0 = schema.outcome_sign * frame[schema.outcome_normalized].to_numpy(float)
    Z = frame[list(schema.selection_free)].to_numpy(float).reshape(len(frame), -1)
    X = frame[list(schema.outcome_free)].to_numpy(float).reshape(len(frame), -1)
    if standardize:
        Z = np.column_stack([_standardized(Z[:, j]) for j in range(Z.shape[1])]) if Z.shape[1] else Z
        X = np.column_stack([_standardized(X[:, j]) for j in range(X.shape[1])]) if X.shape[1] else X
    return Dataset(z0=z0, Z=Z, x0=x0, X=X, d=d, y=y)


def write_csv(path, dataset: Dataset, schema: CsvSchema | None = None) -> CsvSchema:
    """Write a dataset with 17-significant-digit numbers; returns the schema used.

    The outcome cell is left empty on unselected rows.
    """
    if schema is None:
        schema = CsvSchema.default_for(dataset.p_z, dataset.p_x)
    if len(schema.selection_free) != dataset.p_z or len(schema.outcome_free) != dataset.p_x:
        raise SchemaError("schema free-column counts do not match the dataset")
    data = {schema.selection_normalized: schema.selection_sign * dataset.z0}
    for j, name in enumerate(schema.selection_free):
        data[name] = dataset.Z[:, j]
    data[schema.outcome_normalized] = schema.outcome_sign * dataset.x0
    for j, name in enumerate(schema.outcome_free):
        data[name] = dataset.X[:, j]
    data[schema.d] = dataset.d
    data[schema.y] = dataset.y
    pd.DataFrame(data).to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return schema


def binarize_outcome(y_star: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Turn a continuous observed outcome into 1{y* > selected-sample median}.

    Returns NaN on unselected rows, matching the Dataset contract.
    """
    y_star = np.asarray(y_star, dtype=float)
    d = np.asarray(d, dtype=float)
    sel = d == 1.0
    if not sel.any():
        raise SchemaError("cannot binarize with no selected observations")
    cut = np.median(y_star[sel])
    return np.where(sel, (y_star > cut).astype(float), np.nan)
