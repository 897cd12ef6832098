"""Monte Carlo laboratory: data generation, replication driver, aggregation.

Designs follow the binary-outcome-with-selection model with iid Uniform[0,1]
regressors and either a correlated normal or correlated Cauchy error pair.
Replications run in parallel processes with independent per-replication seeds,
so results do not depend on scheduling order.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from selabel import parametric, stage1, stage2
from selabel.model import Dataset

WORKERS_ENV_VAR = "SELABEL_WORKERS"


def _default_truth(p: int) -> np.ndarray:
    signs = np.where(np.arange(p) % 2 == 0, 1.0, -1.0)
    return signs / np.sqrt(p) if p else np.zeros(0)


@dataclass(frozen=True)
class DgpSpec:
    """One simulation design; every draw is fully determined by ``seed``."""

    n: int
    p_z: int
    p_x: int
    error_law: str = "normal"
    true_delta: tuple | None = None
    true_beta: tuple | None = None
    seed: int = 0
    z0_const: float | None = None
    x0_const: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.error_law not in ("normal", "cauchy"):
            raise ValueError(f"unknown error law {self.error_law!r}")
        for name, vec, p in (
            ("true_delta", self.true_delta, self.p_z),
            ("true_beta", self.true_beta, self.p_x),
        ):
            if vec is not None and len(vec) != p:
                raise ValueError(f"{name} must have length {p}")

    @property
    def delta0(self) -> np.ndarray:
        if self.true_delta is None:
            return _default_truth(self.p_z)
        return np.asarray(self.true_delta, dtype=float)

    @property
    def beta0(self) -> np.ndarray:
        if self.true_beta is None:
            return _default_truth(self.p_x)
        return np.asarray(self.true_beta, dtype=float)


def _draw_errors(rng: np.random.Generator, n: int, law: str):
    if law == "normal":
        eta = rng.standard_normal(n)
        eps = 0.5 * eta + np.sqrt(0.75) * rng.standard_normal(n)
    else:
        eta = rng.standard_cauchy(n)
        eps = 0.5 * eta + np.sqrt(0.75) * rng.standard_cauchy(n)
    return eta, eps


def generate_dataset(spec: DgpSpec) -> Dataset:
    """Simulate one dataset; Y is NaN exactly on the unselected rows."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    z0 = rng.uniform(size=n)
    Z = rng.uniform(size=(n, spec.p_z))
    x0 = rng.uniform(size=n)
    X = rng.uniform(size=(n, spec.p_x))
    if spec.z0_const is not None:
        z0 = np.full(n, spec.z0_const)
    if spec.x0_const is not None:
        x0 = np.full(n, spec.x0_const)
    u, v = _draw_errors(rng, n, spec.error_law)
    d = (z0 + Z @ spec.delta0 - u > 0).astype(float)
    y_latent = (x0 + X @ spec.beta0 - v > 0).astype(float)
    y = np.where(d > 0, y_latent, np.nan)
    return Dataset(z0=z0, Z=Z, x0=x0, X=X, d=d, y=y)


class Metrics(NamedTuple):
    bias: np.ndarray
    rmse: np.ndarray
    agg_bias: float
    agg_rmse: float


def aggregate_metrics(estimates, truth) -> Metrics:
    """Per-coefficient bias/RMSE over replications plus scalar summaries.

    The scalar bias sums the absolute per-coefficient biases; the scalar RMSE
    is the Euclidean norm of the per-coefficient RMSEs.
    """
    est = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.ndim != 2 or est.shape[0] < 1 or est.shape[1] != truth.size:
        raise ValueError("estimates must be a nonempty (reps, p) array")
    dev = est - truth
    bias = dev.mean(axis=0)
    rmse = np.sqrt((dev**2).mean(axis=0))
    return Metrics(
        bias=bias,
        rmse=rmse,
        agg_bias=float(np.abs(bias).sum()),
        agg_rmse=float(np.linalg.norm(rmse)),
    )


@dataclass(frozen=True)
class EstimatorConfig:
    """Which estimator to run in the harness and with what settings.

    ``kind`` is one of "mle", "nls", "matching", "sieve", or "truth" (a stub
    that returns the design's true coefficients, for harness checks).
    """

    kind: str
    name: str = ""
    stage1_config: stage1.GdConfig = field(
        default_factory=lambda: stage1.GdConfig(
            learning_rate=8.0, tolerance=8e-5, max_iterations=50_000, sieve_order=4
        )
    )
    stage2_config: stage1.GdConfig = field(
        default_factory=lambda: stage1.GdConfig(
            learning_rate=8.0, tolerance=8e-5, max_iterations=50_000, sieve_order=3
        )
    )
    termination: stage2.MatchingTermination = field(
        default_factory=lambda: stage2.MatchingTermination(
            stability_rounds=50, max_iterations=2_000
        )
    )
    optimizer: parametric.OptimizerConfig = field(
        default_factory=parametric.OptimizerConfig
    )
    m: int = 1

    def __post_init__(self):
        if self.kind not in ("mle", "nls", "matching", "sieve", "truth"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if not self.name:
            object.__setattr__(self, "name", self.kind)


def default_methods() -> tuple[EstimatorConfig, ...]:
    return tuple(EstimatorConfig(kind=k) for k in ("mle", "nls", "matching", "sieve"))


class MethodRun(NamedTuple):
    delta: np.ndarray | None
    beta: np.ndarray | None
    seconds: float
    error: str | None


def _stage1_key(config: stage1.GdConfig) -> tuple:
    guess = config.initial_guess
    return (
        config.learning_rate,
        config.max_iterations,
        config.tolerance,
        config.sieve_order,
        None if guess is None else tuple(np.asarray(guess, dtype=float)),
        config.ridge,
        tuple(config.aic_candidates),
    )


def _run_method(
    dataset: Dataset,
    cfg: EstimatorConfig,
    spec: DgpSpec,
    first_cache: dict | None = None,
) -> MethodRun:
    start = time.perf_counter()
    try:
        if cfg.kind == "truth":
            delta, beta = spec.delta0, spec.beta0
        elif cfg.kind == "mle":
            fit = parametric.joint_mle(dataset, cfg.optimizer)
            delta, beta = fit.delta, fit.beta
        elif cfg.kind == "nls":
            fit = parametric.two_step_nls(dataset, cfg.optimizer)
            delta, beta = fit.delta, fit.beta
        else:
            # The first stage depends only on its own configuration, so
            # methods sharing one within a replication also share the fit.
            key = _stage1_key(cfg.stage1_config)
            first = None if first_cache is None else first_cache.get(key)
            if first is None:
                first = stage1.sbgd_first_stage(dataset, cfg.stage1_config)
                if first_cache is not None:
                    first_cache[key] = first
            if cfg.kind == "matching":
                second = stage2.matching_estimate(
                    dataset, first, cfg.stage2_config, cfg.termination, cfg.m
                )
            else:
                second = stage2.sieve_estimate(dataset, first, cfg.stage2_config)
            delta, beta = first.delta, second.beta
    except Exception as exc:  # noqa: BLE001 - harness isolates method failures
        return MethodRun(None, None, time.perf_counter() - start, repr(exc))
    return MethodRun(
        np.asarray(delta, dtype=float),
        np.asarray(beta, dtype=float),
        time.perf_counter() - start,
        None,
    )


def replication_seed(base_seed: int, rep: int) -> int:
    """Independent per-replication seed, invariant to scheduling order."""
    ss = np.random.SeedSequence((base_seed, rep))
    return int(ss.generate_state(1, np.uint64)[0])


def _run_replication(args) -> dict[str, MethodRun]:
    spec, methods, rep = args
    rep_spec = replace(spec, seed=replication_seed(spec.seed, rep))
    dataset = generate_dataset(rep_spec)
    first_cache: dict = {}
    return {
        cfg.name: _run_method(dataset, cfg, rep_spec, first_cache)
        for cfg in methods
    }


@dataclass(frozen=True)
class MethodReport:
    name: str
    bias_delta: np.ndarray | None
    rmse_delta: np.ndarray | None
    bias_beta: np.ndarray | None
    rmse_beta: np.ndarray | None
    agg_bias_delta: float
    agg_rmse_delta: float
    agg_bias_beta: float
    agg_rmse_beta: float
    seconds: float
    n_success: int
    n_failed: int

    @property
    def failed(self) -> bool:
        return self.n_success == 0


@dataclass(frozen=True)
class MonteCarloReport:
    spec: DgpSpec
    reps: int
    methods: tuple[MethodReport, ...]

    def method(self, name: str) -> MethodReport:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get(WORKERS_ENV_VAR)
    return max(1, int(env)) if env else 1


def run_monte_carlo(
    spec: DgpSpec,
    methods=None,
    reps: int = 1,
    workers: int | None = None,
) -> MonteCarloReport:
    """Run all requested estimators across ``reps`` independent replications.

    Failures of individual method-runs are counted and excluded from the
    aggregates; a method with zero successes is flagged as failed rather than
    aborting the report.
    """
    if reps < 1:
        raise ValueError("reps must be at least 1")
    methods = tuple(methods) if methods is not None else default_methods()
    names = [cfg.name for cfg in methods]
    if len(set(names)) != len(names):
        raise ValueError("method names must be unique")
    tasks = [(spec, methods, rep) for rep in range(reps)]
    workers = resolve_workers(workers)
    if workers == 1:
        results = [_run_replication(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_replication, tasks))

    summaries = []
    for cfg in methods:
        runs = [res[cfg.name] for res in results]
        good = [r for r in runs if r.error is None]
        seconds = float(sum(r.seconds for r in runs))
        if not good:
            summaries.append(
                MethodReport(
                    name=cfg.name,
                    bias_delta=None,
                    rmse_delta=None,
                    bias_beta=None,
                    rmse_beta=None,
                    agg_bias_delta=float("nan"),
                    agg_rmse_delta=float("nan"),
                    agg_bias_beta=float("nan"),
                    agg_rmse_beta=float("nan"),
                    seconds=seconds,
                    n_success=0,
                    n_failed=len(runs),
                )
            )
            continue
        md = aggregate_metrics([r.delta for r in good], spec.delta0)
        mb = aggregate_metrics([r.beta for r in good], spec.beta0)
        summaries.append(
            MethodReport(
                name=cfg.name,
                bias_delta=md.bias,
                rmse_delta=md.rmse,
                bias_beta=mb.bias,
                rmse_beta=mb.rmse,
                agg_bias_delta=md.agg_bias,
                agg_rmse_delta=md.agg_rmse,
                agg_bias_beta=mb.agg_bias,
                agg_rmse_beta=mb.agg_rmse,
                seconds=seconds,
                n_success=len(good),
                n_failed=len(runs) - len(good),
            )
        )
    return MonteCarloReport(spec=spec, reps=reps, methods=tuple(summaries))


def report_to_text(report: MonteCarloReport) -> str:
    """Aligned table with one row per method: B-d, R-d, B-b, R-b, Time."""
    header = f"{'method':<10}{'B-d':>10}{'R-d':>10}{'B-b':>10}{'R-b':>10}{'Time':>10}{'fail':>6}"
    lines = [
        f"design: n={report.spec.n} p_z={report.spec.p_z} p_x={report.spec.p_x} "
        f"errors={report.spec.error_law} reps={report.reps}",
        header,
    ]
    for m in report.methods:
        lines.append(
            f"{m.name:<10}"
            f"{m.agg_bias_delta:>10.4f}{m.agg_rmse_delta:>10.4f}"
            f"{m.agg_bias_beta:>10.4f}{m.agg_rmse_beta:>10.4f}"
            f"{m.seconds:>10.1f}{m.n_failed:>6d}"
        )
    return "\n".join(lines) + "\n"


def report_to_csv(report: MonteCarloReport) -> str:
    """Per-coefficient long-form CSV: method, coefficient, bias, rmse, time_seconds."""
    lines = ["method,coefficient,bias,rmse,time_seconds"]
    for m in report.methods:
        if m.failed:
            lines.append(f"{m.name},ALL,nan,nan,{m.seconds:.17g}")
            continue
        for j in range(m.bias_delta.size):
            lines.append(
                f"{m.name},delta_{j + 1},{m.bias_delta[j]:.17g},"
                f"{m.rmse_delta[j]:.17g},{m.seconds:.17g}"
            )
        for j in range(m.bias_beta.size):
            lines.append(
                f"{m.name},beta_{j + 1},{m.bias_beta[j]:.17g},"
                f"{m.rmse_beta[j]:.17g},{m.seconds:.17g}"
            )
    return "\n".join(lines) + "\n"
