"""Matching-based gradient descent for a two-alternative choice model.

Choices y_i1 = 1{alternative 1 preferred}; observations are matched on the
alternative-2 index |(x_i2 - x_l2)' beta| and the coefficient vector is
identified up to scale, with the first component normalized to absolute
value 1 (sign taken from the initial guess).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from selabel.errors import DimensionError, DivergenceError, EstimationError
from selabel.neighbors import nearest_neighbors
from selabel.stage1 import TRACE_THIN_AFTER, TRACE_THIN_EVERY, GdConfig
from selabel.stage2 import MatchingTermination, NeighborWeights, StabilityTracker


@dataclass(frozen=True)
class ChoiceDataset:
    """Regressors of both alternatives and the indicator of choosing 1."""

    x1: np.ndarray
    x2: np.ndarray
    y1: np.ndarray

    def __post_init__(self):
        x1 = np.ascontiguousarray(np.asarray(self.x1, dtype=float))
        x2 = np.ascontiguousarray(np.asarray(self.x2, dtype=float))
        y1 = np.ascontiguousarray(np.asarray(self.y1, dtype=float))
        if x1.ndim != 2 or x2.shape != x1.shape:
            raise DimensionError("x1 and x2 must be matrices of identical shape")
        if y1.shape != (x1.shape[0],):
            raise DimensionError("y1 must be a vector with one entry per row")
        if not np.isfinite(x1).all() or not np.isfinite(x2).all():
            raise ValueError("regressors must be finite")
        if not np.isin(y1, (0.0, 1.0)).all():
            raise ValueError("y1 must be binary")
        for arr in (x1, x2, y1):
            arr.setflags(write=False)
        object.__setattr__(self, "x1", x1)
        object.__setattr__(self, "x2", x2)
        object.__setattr__(self, "y1", y1)

    @property
    def n(self) -> int:
        return self.x1.shape[0]

    @property
    def p(self) -> int:
        return self.x1.shape[1]


def choice_knn_weights(x2: np.ndarray, beta_k: np.ndarray, m: int) -> NeighborWeights:
    """m nearest rows per observation under the scalar index metric.

    Distance between i and l is |(x_i2 - x_l2)' beta_k|; ties go to the
    smaller row index, and each matched row carries weight 1/m.
    """
    x2 = np.asarray(x2, dtype=float)
    beta_k = np.asarray(beta_k, dtype=float)
    if x2.ndim != 2 or beta_k.shape != (x2.shape[1],):
        raise DimensionError("beta_k must have one entry per column of x2")
    index = (x2 @ beta_k)[:, None]
    neighbor_rows = nearest_neighbors(index, m)
    return NeighborWeights(
        selected_rows=np.arange(x2.shape[0]), neighbor_rows=neighbor_rows
    )


def choice_update_step(
    data: ChoiceDataset, beta_k: np.ndarray, weights: NeighborWeights, gamma: float
) -> np.ndarray:
    """One gradient step: beta - (gamma/n) sum_il W_il (y_l1 - y_i1) x_i1.

    The residual is the matched-neighbor mean minus the own choice, the same
    orientation as the matching update for the selection model: observations
    choosing alternative 1 more often than their matched peers push the index
    up along their own regressors.
    """
    beta_k = np.asarray(beta_k, dtype=float)
    resid = data.y1[weights.neighbor_rows].mean(axis=1) - data.y1
    grad = (resid @ data.x1) / data.n
    return beta_k - gamma * grad


def _normalize(beta: np.ndarray, sign0: float) -> np.ndarray:
    if abs(beta[0]) < 1e-12:
        raise EstimationError(
            "first coefficient collapsed to zero; scale normalization undefined"
        )
    return beta * (sign0 / beta[0])


def multinomial_estimate(
    data: ChoiceDataset,
    config: GdConfig = GdConfig(),
    term: MatchingTermination = MatchingTermination(),
    m: int = 1,
) -> np.ndarray:
    """Iterate weight refresh, gradient step, and scale renormalization.

    The default initial guess is the all-ones vector; the first coefficient's
    sign there fixes the normalization sign for the whole run. Terminates
    under the same iterate-history stability rule as the matching estimator.
    """
    beta = (
        np.ones(data.p)
        if config.initial_guess is None
        else np.asarray(config.initial_guess, dtype=float).copy()
    )
    sign0 = 1.0 if beta[0] >= 0 else -1.0
    beta = _normalize(beta, sign0)
    tracker = StabilityTracker(term.stability_rounds)
    tracker.update(beta)
    trace: list = []
    for k in range(1, term.max_iterations + 1):
        weights = choice_knn_weights(data.x2, beta, m)
        beta_next = choice_update_step(data, beta, weights, config.learning_rate)
        if not np.isfinite(beta_next).all():
            raise DivergenceError(
                f"choice iterate became non-finite at iteration {k}", trace
            )
        beta_next = _normalize(beta_next, sign0)
        if k <= TRACE_THIN_AFTER or k % TRACE_THIN_EVERY == 0:
            trace.append((k, float(np.max(np.abs(beta_next - beta)))))
        beta = beta_next
        if tracker.update(beta):
            break
    return beta
