"""Shared fixtures for the heavy end-to-end study used by the acceptance tests.

The Monte Carlo designs here are expensive (minutes each on 8 workers), so
they are session-scoped and only materialize when a test requests them.
"""

import numpy as np
import pytest

from selabel.simlab import DgpSpec, EstimatorConfig, run_monte_carlo

ACCEPTANCE_N = 20_000
ACCEPTANCE_REPS = 50
ACCEPTANCE_WORKERS = 8


def _methods(*kinds: str) -> list[EstimatorConfig]:
    return [EstimatorConfig(kind=k) for k in kinds]


@pytest.fixture(scope="session")
def cauchy_study():
    """Cauchy-error design, p=10: parametric methods are misspecified."""
    spec = DgpSpec(
        n=ACCEPTANCE_N,
        p_z=10,
        p_x=10,
        error_law="cauchy",
        seed=20260826,
    )
    return run_monte_carlo(
        spec,
        methods=_methods("mle", "matching", "sieve"),
        reps=ACCEPTANCE_REPS,
        workers=ACCEPTANCE_WORKERS,
    )


@pytest.fixture(scope="session")
def normal_study():
    """Normal-error design, p=10: every method is correctly specified."""
    spec = DgpSpec(
        n=ACCEPTANCE_N, p_z=10, p_x=10, error_law="normal", seed=20260826
    )
    return run_monte_carlo(
        spec,
        methods=_methods("mle", "nls", "matching", "sieve"),
        reps=ACCEPTANCE_REPS,
        workers=ACCEPTANCE_WORKERS,
    )


@pytest.fixture(scope="session")
def normal_study_half_n():
    """Same normal design at half the sample size, sieve only (rate check)."""
    spec = DgpSpec(
        n=ACCEPTANCE_N // 2, p_z=10, p_x=10, error_law="normal", seed=20260826
    )
    return run_monte_carlo(
        spec,
        methods=_methods("sieve"),
        reps=ACCEPTANCE_REPS,
        workers=ACCEPTANCE_WORKERS,
    )


def gate(label: str, passed: bool, detail: str) -> bool:
    """Print the one-line verdict for an acceptance check, then return it."""
    print(f"{label}: {'PASS' if passed else 'FAIL'} — {detail}")
    return passed
