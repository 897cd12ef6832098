"""Sieve-based batched gradient descent for the selection-equation coefficients.

Each round refits the error-CDF sieve by least squares of D on the basis
evaluated at the current selection index, then takes one full-sample gradient
step on delta with divisor n.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from selabel import basis as bas
from selabel.errors import DivergenceError
from selabel.model import Dataset, selection_index

TRACE_THIN_AFTER = 10_000
TRACE_THIN_EVERY = 100


@dataclass(frozen=True)
class GdConfig:
    """Gradient-descent settings shared by the iterative estimators.

    ``sieve_order`` None means data-driven selection by the AIC-type
    criterion over ``aic_candidates``.
    """

    learning_rate: float = 1.0
    max_iterations: int = 1_000_000
    tolerance: float = 1e-6
    sieve_order: int | None = None
    initial_guess: np.ndarray | None = None
    ridge: float = bas.DEFAULT_RIDGE
    aic_candidates: tuple[int, ...] = (1, 2, 3, 4, 5, 6)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class FirstStageFit:
    """Result of the first-stage descent.

    ``trace`` holds (iteration, max coordinate change, squared-error loss)
    tuples, thinned to every 100th entry beyond 10**4 iterations.
    """

    delta: np.ndarray
    pi: bas.SieveCoefficients | None
    trace: tuple
    iterations: int
    converged: bool

    def index_rescale(self) -> bas.AffineMap | None:
        return self.pi.u_map if self.pi is not None else None


def _record(trace: list, k: int, change: float, loss: float) -> None:
    if k <= TRACE_THIN_AFTER or k % TRACE_THIN_EVERY == 0:
        trace.append((k, change, loss))


def sbgd_step(
    dataset: Dataset, delta_k: np.ndarray, config: GdConfig, order: int | None = None
) -> tuple[np.ndarray, bas.SieveCoefficients]:
    """One full round: sieve refit of the error CDF, then a gradient step."""
    q = config.sieve_order if order is None else order
    if q is None:
        raise ValueError("sbgd_step needs an explicit sieve order")
    delta_next, pi, _, _ = _step(dataset, np.asarray(delta_k, float), config, q)
    return delta_next, pi


def _step(dataset: Dataset, delta_k, config: GdConfig, q: int):
    index = selection_index(dataset, delta_k)
    amap = bas.AffineMap.from_samples(index)
    rows = bas.legendre_univariate(amap.apply(index), q)
    pi = bas.sieve_ols_fit(
        rows,
        dataset.d.astype(float),
        ridge=config.ridge,
        basis=bas.SieveBasis(q, "univariate"),
        u_map=amap,
    )
    fitted = rows @ pi.values
    resid = fitted - dataset.d
    loss = float(np.mean(resid**2))
    grad = (resid @ dataset.Z) / dataset.n
    delta_next = delta_k - config.learning_rate * grad
    return delta_next, pi, fitted, loss


def _descend(dataset: Dataset, config: GdConfig, q: int) -> FirstStageFit:
    delta = (
        np.zeros(dataset.p_z)
        if config.initial_guess is None
        else np.asarray(config.initial_guess, dtype=float).copy()
    )
    trace: list = []
    pi = None
    converged = False
    k = 0
    for k in range(1, config.max_iterations + 1):
        delta_next, pi, _, loss = _step(dataset, delta, config, q)
        change = float(np.max(np.abs(delta_next - delta))) if dataset.p_z else 0.0
        _record(trace, k, change, loss)
        if not np.isfinite(delta_next).all():
            raise DivergenceError(
                f"first-stage iterate became non-finite at iteration {k}", trace
            )
        delta = delta_next
        if change < config.tolerance:
            converged = True
            break
    return FirstStageFit(
        delta=delta, pi=pi, trace=tuple(trace), iterations=k, converged=converged
    )


def sbgd_first_stage(dataset: Dataset, config: GdConfig = GdConfig()) -> FirstStageFit:
    """Run the first-stage descent from the configured initial guess.

    With ``sieve_order=None`` every candidate order is fit and the AIC-type
    criterion (penalty 2q/n) picks the returned fit.
    """
    if config.sieve_order is not None:
        return _descend(dataset, config, config.sieve_order)

    fits: dict[int, FirstStageFit] = {}

    def fitter(q: int) -> np.ndarray:
        fits[q] = _descend(dataset, config, q)
        index = selection_index(dataset, fits[q].delta)
        return fits[q].pi.evaluate(index)

    chosen = bas.select_order_aic(
        dataset.d.astype(float), fitter, config.aic_candidates, effective_n=dataset.n
    )
    return fits[chosen]


def evaluate_F_U(fit: FirstStageFit, u) -> np.ndarray:
    """Evaluate the fitted error CDF at raw index values (not clipped to [0,1])."""
    if fit.pi is None:
        raise ValueError("fit carries no sieve coefficients")
    return fit.pi.evaluate(u)
