"""Data containers and index computations for the two-equation selection model.

The model has a selection equation deciding D from the index ``z0 + Z @ delta``
and an outcome equation deciding Y from ``x0 + X @ beta``; Y is observed only
where D = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from selabel.errors import DimensionError


class IndexPair(NamedTuple):
    """A (selection index, outcome index) point for one observation."""

    z_index: float
    x_index: float


def _as_vector(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {arr.shape}")
    return arr


def _as_matrix(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be two-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class Dataset:
    """Immutable observed sample.

    ``y`` holds NaN exactly where ``d == 0``; unobserved outcomes never carry a
    numeric value, so using them by accident fails loudly instead of silently.
    All validation happens here; estimators assume a valid Dataset.
    """

    z0: np.ndarray
    Z: np.ndarray
    x0: np.ndarray
    X: np.ndarray
    d: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        z0 = _as_vector(self.z0, "z0")
        x0 = _as_vector(self.x0, "x0")
        Z = _as_matrix(self.Z, "Z")
        X = _as_matrix(self.X, "X")
        d_raw = np.asarray(self.d)
        y = np.asarray(self.y, dtype=float)

        n = z0.shape[0]
        if n < 1:
            raise DimensionError("dataset must contain at least one observation")
        for name, arr in (("Z", Z), ("x0", x0), ("X", X), ("d", d_raw), ("y", y)):
            if arr.shape[0] != n:
                raise DimensionError(f"{name} has {arr.shape[0]} rows, expected {n}")

        if not np.isin(d_raw, (0, 1)).all():
            raise ValueError("d must be binary (0/1)")
        d = np.asarray(d_raw, dtype=np.int8)

        observed = ~np.isnan(y)
        if not np.array_equal(observed, d == 1):
            bad = int(np.flatnonzero(observed != (d == 1))[0])
            raise ValueError(
                f"y must be present exactly where d == 1; first violation at row {bad}"
            )
        if not np.isin(y[observed], (0.0, 1.0)).all():
            raise ValueError("observed y values must be binary (0/1)")
        for name, arr in (("z0", z0), ("Z", Z), ("x0", x0), ("X", X)):
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")

        object.__setattr__(self, "z0", z0)
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "y", y)
        for arr in (z0, Z, x0, X, d, y):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return self.z0.shape[0]

    @property
    def p_z(self) -> int:
        return self.Z.shape[1]

    @property
    def p_x(self) -> int:
        return self.X.shape[1]

    @property
    def n_selected(self) -> int:
        """S_n, the number of observations with d == 1."""
        return int(self.d.sum())

    @property
    def selected(self) -> np.ndarray:
        """Boolean mask of rows with d == 1."""
        return self.d == 1

    def y_observed(self) -> np.ndarray:
        """Binary outcomes on the selected subsample, in row order."""
        return self.y[self.selected]

    def y_filled(self) -> np.ndarray:
        """y with unobserved entries replaced by 0; only meaningful under a d-mask."""
        return np.where(self.selected, self.y, 0.0)


@dataclass(frozen=True)
class ParameterPoint:
    """A (delta, beta) coefficient pair."""

    delta: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        delta = _as_vector(self.delta, "delta")
        beta = _as_vector(self.beta, "beta")
        if not (np.isfinite(delta).all() and np.isfinite(beta).all()):
            raise ValueError("parameters must be finite")
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "beta", beta)

    def matches(self, dataset: Dataset) -> bool:
        return self.delta.shape[0] == dataset.p_z and self.beta.shape[0] == dataset.p_x


def selection_index(dataset: Dataset, delta) -> np.ndarray:
    """Selection-equation index z0 + Z @ delta."""
    delta = _as_vector(delta, "delta")
    if delta.shape[0] != dataset.p_z:
        raise DimensionError(
            f"delta has length {delta.shape[0]}, expected {dataset.p_z}"
        )
    return dataset.z0 + dataset.Z @ delta


def outcome_index(dataset: Dataset, beta) -> np.ndarray:
    """Outcome-equation index x0 + X @ beta."""
    beta = _as_vector(beta, "beta")
    if beta.shape[0] != dataset.p_x:
        raise DimensionError(f"beta has length {beta.shape[0]}, expected {dataset.p_x}")
    return dataset.x0 + dataset.X @ beta
