"""Second-stage estimators of the outcome coefficients under selection.

Two routes: matching-based gradient descent with m-nearest-neighbor weights in
the estimated 2-D index plane, and sieve-based gradient descent with a tensor
Legendre approximation of the selection-corrected outcome probability.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from selabel import basis as bas
from selabel.errors import DivergenceError, InsufficientDataError
from selabel.model import Dataset, outcome_index, selection_index
from selabel.neighbors import nearest_neighbors
from selabel.stage1 import TRACE_THIN_AFTER, TRACE_THIN_EVERY, FirstStageFit, GdConfig


@dataclass(frozen=True)
class NeighborWeights:
    """Sparse m-NN assignment over the selected subsample.

    ``selected_rows[i]`` is the dataset row of the i-th selected observation;
    ``neighbor_rows[i]`` its m_eff matched dataset rows, each with weight
    1/m_eff. No self-matches; all matched rows are selected.
    """

    selected_rows: np.ndarray
    neighbor_rows: np.ndarray

    @property
    def m_eff(self) -> int:
        return self.neighbor_rows.shape[1]

    @property
    def weight(self) -> float:
        return 1.0 / self.m_eff


@dataclass(frozen=True)
class MatchingTermination:
    """History-stability stopping rule for the matching iteration."""

    stability_rounds: int = 50
    max_iterations: int = 1_000_000

    def __post_init__(self):
        if self.stability_rounds < 1:
            raise ValueError("stability_rounds must be at least 1")


@dataclass(frozen=True)
class SecondStageFit:
    beta: np.ndarray
    method: str
    trace: tuple
    iterations: int
    converged: bool
    g_coefficients: bas.SieveCoefficients | None = None

    def __post_init__(self):
        if self.method == "sieve" and self.g_coefficients is None:
            raise ValueError("sieve fits must carry G coefficients")


class StabilityTracker:
    """Detects T consecutive rounds with unchanged running max/min history."""

    def __init__(self, stability_rounds: int):
        self.stability_rounds = stability_rounds
        self._run_max = None
        self._run_min = None
        self._streak = 0

    def update(self, iterate: np.ndarray) -> bool:
        """Feed one iterate; True once the history box has been stable T rounds."""
        if self._run_max is None:
            self._run_max = iterate.copy()
            self._run_min = iterate.copy()
            self._streak = 0
            return False
        new_max = np.maximum(self._run_max, iterate)
        new_min = np.minimum(self._run_min, iterate)
        if np.array_equal(new_max, self._run_max) and np.array_equal(
            new_min, self._run_min
        ):
            self._streak += 1
        else:
            self._streak = 0
        self._run_max = new_max
        self._run_min = new_min
        return self._streak >= self.stability_rounds


def knn_weights(index_points: np.ndarray, selected_mask, m: int) -> NeighborWeights:
    """m-NN weights among selected observations in the 2-D index plane.

    ``index_points`` is an (n, 2) array of (selection index, outcome index)
    pairs. Euclidean distance; ties broken by smaller observation index.
    """
    index_points = np.asarray(index_points, dtype=float)
    selected_mask = np.asarray(selected_mask, dtype=bool)
    selected_rows = np.flatnonzero(selected_mask)
    if selected_rows.size < 2:
        raise InsufficientDataError(
            "matching needs at least 2 selected observations"
        )
    local = nearest_neighbors(index_points[selected_rows], m)
    return NeighborWeights(
        selected_rows=selected_rows, neighbor_rows=selected_rows[local]
    )


def matching_update_step(
    dataset: Dataset, beta_k: np.ndarray, weights: NeighborWeights, gamma: float
) -> np.ndarray:
    """One matching gradient step: beta - (gamma/S_n) * sum_ij W_ij (Y_j - Y_i) X_i."""
    beta_k = np.asarray(beta_k, dtype=float)
    y = dataset.y
    y_own = y[weights.selected_rows]
    y_nbr_mean = y[weights.neighbor_rows].mean(axis=1)
    resid = y_nbr_mean - y_own
    grad = (resid @ dataset.X[weights.selected_rows]) / dataset.n_selected
    return beta_k - gamma * grad


def matching_estimate(
    dataset: Dataset,
    first_stage: FirstStageFit,
    config: GdConfig,
    term: MatchingTermination = MatchingTermination(),
    m: int = 1,
) -> SecondStageFit:
    """Algorithm alternating m-NN weight refresh and the matching step.

    Stops when the componentwise running max and min of the iterate history
    are both unchanged for ``term.stability_rounds`` consecutive rounds, or at
    the iteration cap; the final iterate (not an average) is returned.
    """
    z_index = selection_index(dataset, first_stage.delta)
    beta = (
        np.zeros(dataset.p_x)
        if config.initial_guess is None
        else np.asarray(config.initial_guess, dtype=float).copy()
    )
    tracker = StabilityTracker(term.stability_rounds)
    tracker.update(beta)
    trace: list = []
    converged = False
    k = 0
    for k in range(1, term.max_iterations + 1):
        x_index = outcome_index(dataset, beta)
        points = np.column_stack((z_index, x_index))
        weights = knn_weights(points, dataset.selected, m)
        beta_next = matching_update_step(dataset, beta, weights, config.learning_rate)
        change = float(np.max(np.abs(beta_next - beta))) if dataset.p_x else 0.0
        if k <= TRACE_THIN_AFTER or k % TRACE_THIN_EVERY == 0:
            trace.append((k, change))
        if not np.isfinite(beta_next).all():
            raise DivergenceError(
                f"matching iterate became non-finite at iteration {k}", trace
            )
        beta = beta_next
        if tracker.update(beta):
            converged = True
            break
    return SecondStageFit(
        beta=beta,
        method="matching",
        trace=tuple(trace),
        iterations=k,
        converged=converged,
    )


def fit_G_sieve(
    dataset: Dataset,
    z_index_hat: np.ndarray,
    beta_k: np.ndarray,
    q: int,
    ridge: float = bas.DEFAULT_RIDGE,
) -> bas.SieveCoefficients:
    """Weighted sieve least squares of Y on the tensor basis, selected rows only.

    Both coordinates are rescaled to [0, 1] from the current selected-sample
    index ranges; the maps are stored on the returned coefficients.
    """
    if dataset.n_selected < 1:
        raise InsufficientDataError("sieve fit needs at least 1 selected observation")
    sel = dataset.selected
    x_index = outcome_index(dataset, beta_k)
    u_map = bas.AffineMap.from_samples(z_index_hat[sel])
    v_map = bas.AffineMap.from_samples(x_index[sel])
    rows = bas.tensor_bivariate(
        u_map.apply(z_index_hat[sel]), v_map.apply(x_index[sel]), q
    )
    return bas.sieve_ols_fit(
        rows,
        dataset.y[sel],
        ridge=ridge,
        basis=bas.SieveBasis(q, "tensor"),
        u_map=u_map,
        v_map=v_map,
    )


def sieve_update_step(
    dataset: Dataset,
    z_index_hat: np.ndarray,
    beta_k: np.ndarray,
    g_hat: bas.SieveCoefficients,
    gamma: float,
) -> np.ndarray:
    """One sieve gradient step: beta - (gamma/S_n) sum_i D_i (G_hat - Y_i) X_i."""
    beta_k = np.asarray(beta_k, dtype=float)
    sel = dataset.selected
    x_index = outcome_index(dataset, beta_k)
    g_vals = g_hat.evaluate(z_index_hat[sel], x_index[sel])
    resid = g_vals - dataset.y[sel]
    grad = (resid @ dataset.X[sel]) / dataset.n_selected
    return beta_k - gamma * grad


def bgd_oracle_step(
    dataset: Dataset,
    z_index: np.ndarray,
    beta_k: np.ndarray,
    g_func,
    gamma: float,
) -> np.ndarray:
    """The infeasible update with a known conditional probability function.

    ``g_func(u, v)`` is evaluated at the (selection, outcome) index pairs of
    the selected rows. Used by diagnostics and the oracle-recovery harness.
    """
    beta_k = np.asarray(beta_k, dtype=float)
    sel = dataset.selected
    x_index = outcome_index(dataset, beta_k)
    resid = np.asarray(g_func(z_index[sel], x_index[sel]), dtype=float) - dataset.y[sel]
    grad = (resid @ dataset.X[sel]) / dataset.n_selected
    return beta_k - gamma * grad


def sieve_estimate(
    dataset: Dataset,
    first_stage: FirstStageFit,
    config: GdConfig,
    q: int | None = None,
) -> SecondStageFit:
    """Alternate the tensor-sieve refit of G and the gradient step on beta.

    Terminates when the max coordinate change drops below the tolerance or at
    the iteration cap. ``q=None`` selects the order by the AIC-type criterion
    (penalty 2q/S_n) at the initial beta.
    """
    z_index = selection_index(dataset, first_stage.delta)
    beta = (
        np.zeros(dataset.p_x)
        if config.initial_guess is None
        else np.asarray(config.initial_guess, dtype=float).copy()
    )
    if q is None:
        q = config.sieve_order
    if q is None:
        sel = dataset.selected

        def fitter(order: int) -> np.ndarray:
            g = fit_G_sieve(dataset, z_index, beta, order, ridge=config.ridge)
            fitted = np.zeros(dataset.n)
            fitted[sel] = g.evaluate(
                z_index[sel], outcome_index(dataset, beta)[sel]
            )
            return fitted

        q = bas.select_order_aic(
            dataset.y_filled(),
            fitter,
            config.aic_candidates,
            effective_n=dataset.n_selected,
            mask=dataset.selected,
        )

    sel = dataset.selected
    trace: list = []
    converged = False
    g_hat = None
    k = 0
    for k in range(1, config.max_iterations + 1):
        g_hat = fit_G_sieve(dataset, z_index, beta, q, ridge=config.ridge)
        beta_next = sieve_update_step(
            dataset, z_index, beta, g_hat, config.learning_rate
        )
        change = float(np.max(np.abs(beta_next - beta))) if dataset.p_x else 0.0
        if k <= TRACE_THIN_AFTER or k % TRACE_THIN_EVERY == 0:
            x_index = outcome_index(dataset, beta)
            loss = float(
                np.mean(
                    (g_hat.evaluate(z_index[sel], x_index[sel]) - dataset.y[sel]) ** 2
                )
            )
            trace.append((k, change, loss))
        if not np.isfinite(beta_next).all():
            raise DivergenceError(
                f"sieve iterate became non-finite at iteration {k}", trace
            )
        beta = beta_next
        if change < config.tolerance:
            converged = True
            break
    return SecondStageFit(
        beta=beta,
        method="sieve",
        trace=tuple(trace),
        iterations=k,
        converged=converged,
        g_coefficients=g_hat,
    )
