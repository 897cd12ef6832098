"""Tests for the Monte Carlo laboratory: DGP, aggregation, replication driver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from selabel.simlab import (
    DgpSpec,
    EstimatorConfig,
    Metrics,
    MonteCarloReport,
    aggregate_metrics,
    generate_dataset,
    replication_seed,
    report_to_csv,
    report_to_text,
    resolve_workers,
    run_monte_carlo,
)


class TestDgpSpec:
    def test_default_truth_alternates_and_has_unit_norm(self):
        spec = DgpSpec(n=10, p_z=4, p_x=3)
        assert np.allclose(spec.delta0, [0.5, -0.5, 0.5, -0.5])
        assert np.isclose(np.linalg.norm(spec.delta0), 1.0)
        assert np.isclose(np.linalg.norm(spec.beta0), 1.0)
        assert spec.beta0[0] > 0 > spec.beta0[1]

    def test_explicit_truth_is_used(self):
        spec = DgpSpec(n=10, p_z=2, p_x=2, true_delta=(1.0, 2.0))
        assert np.allclose(spec.delta0, [1.0, 2.0])

    def test_wrong_truth_length_rejected(self):
        with pytest.raises(ValueError, match="true_delta"):
            DgpSpec(n=10, p_z=3, p_x=2, true_delta=(1.0, 2.0))

    def test_unknown_error_law_rejected(self):
        with pytest.raises(ValueError, match="error law"):
            DgpSpec(n=10, p_z=2, p_x=2, error_law="laplace")


class TestGenerateDataset:
    def test_same_seed_is_deterministic(self):
        spec = DgpSpec(n=500, p_z=3, p_x=2, seed=42)
        a = generate_dataset(spec)
        b = generate_dataset(spec)
        assert np.array_equal(a.z0, b.z0)
        assert np.array_equal(a.Z, b.Z)
        assert np.array_equal(a.d, b.d)
        assert np.array_equal(a.y, b.y, equal_nan=True)

    def test_different_seeds_differ(self):
        a = generate_dataset(DgpSpec(n=500, p_z=3, p_x=2, seed=0))
        b = generate_dataset(DgpSpec(n=500, p_z=3, p_x=2, seed=1))
        assert not np.array_equal(a.z0, b.z0)

    def test_outcome_observed_exactly_on_selected_rows(self):
        ds = generate_dataset(DgpSpec(n=2000, p_z=3, p_x=3, seed=7))
        assert np.all(np.isnan(ds.y[ds.d == 0]))
        assert np.all(~np.isnan(ds.y[ds.d == 1]))
        assert set(np.unique(ds.y[ds.d == 1])) <= {0.0, 1.0}

    def test_regressors_are_uniform_unit_interval(self):
        ds = generate_dataset(DgpSpec(n=20_000, p_z=2, p_x=2, seed=3))
        for arr in (ds.z0, ds.Z, ds.x0, ds.X):
            assert arr.min() >= 0.0
            assert arr.max() <= 1.0
        assert abs(ds.Z.mean() - 0.5) < 0.01
        assert abs(ds.Z.var() - 1.0 / 12.0) < 0.005

    def test_constant_index_selection_rate_matches_normal_cdf(self):
        # With z0 pinned at 0.5 and no free selection coefficients beyond a
        # zero vector, D = 1{0.5 - U > 0} so P(D=1) = Phi(0.5) ~ 0.6915.
        spec = DgpSpec(
            n=200_000,
            p_z=1,
            p_x=1,
            true_delta=(0.0,),
            true_beta=(0.0,),
            seed=11,
            z0_const=0.5,
        )
        ds = generate_dataset(spec)
        assert abs(ds.d.mean() - norm.cdf(0.5)) < 0.005

    def test_error_pair_correlation(self):
        # eta and eps = 0.5 eta + sqrt(0.75) e have correlation 0.5 under the
        # normal law; recover it from selection/outcome indicators at a pinned
        # index via the bivariate-normal orthant probability.
        n = 400_000
        rng = np.random.default_rng(5)
        eta = rng.standard_normal(n)
        eps = 0.5 * eta + np.sqrt(0.75) * rng.standard_normal(n)
        assert abs(np.corrcoef(eta, eps)[0, 1] - 0.5) < 0.01
        assert abs(eps.var() - 1.0) < 0.01

    def test_cauchy_law_produces_heavy_tails(self):
        spec = DgpSpec(n=50_000, p_z=2, p_x=2, error_law="cauchy", seed=9)
        ds = generate_dataset(spec)
        # Heavy-tailed U makes extreme draws dominate: selection probability
        # stays strictly inside (0, 1) but differs from the normal design.
        normal = generate_dataset(DgpSpec(n=50_000, p_z=2, p_x=2, seed=9))
        assert 0.05 < ds.d.mean() < 0.95
        assert not np.isclose(ds.d.mean(), normal.d.mean(), atol=1e-3)


class TestAggregateMetrics:
    def test_exact_estimates_give_zeros(self):
        truth = np.array([1.0, -2.0])
        m = aggregate_metrics([truth, truth, truth], truth)
        assert np.allclose(m.bias, 0.0)
        assert np.allclose(m.rmse, 0.0)
        assert m.agg_bias == 0.0
        assert m.agg_rmse == 0.0

    def test_hand_example_single_coefficient(self):
        m = aggregate_metrics([[0.0], [2.0]], [1.0])
        assert np.isclose(m.bias[0], 0.0)
        assert np.isclose(m.rmse[0], 1.0)
        assert np.isclose(m.agg_bias, 0.0)
        assert np.isclose(m.agg_rmse, 1.0)

    def test_aggregates_sum_abs_bias_and_norm_rmse(self):
        estimates = [[1.5, -0.5], [2.5, 0.5]]
        truth = [1.0, 1.0]
        m = aggregate_metrics(estimates, truth)
        assert np.allclose(m.bias, [1.0, -1.0])
        assert np.isclose(m.agg_bias, 2.0)
        assert np.isclose(m.agg_rmse, np.linalg.norm(m.rmse))

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            aggregate_metrics([[1.0, 2.0]], [1.0])

    @given(
        st.integers(min_value=1, max_value=6).flatmap(
            lambda p: st.tuples(
                st.just(p),
                st.lists(
                    st.lists(
                        st.floats(-5, 5, allow_nan=False),
                        min_size=p,
                        max_size=p,
                    ),
                    min_size=1,
                    max_size=8,
                ),
            )
        )
    )
    @settings(max_examples=60, deadline=None)
    def test_rmse_dominates_abs_bias(self, case):
        p, rows = case
        truth = np.zeros(p)
        m = aggregate_metrics(rows, truth)
        assert np.all(m.rmse + 1e-12 >= np.abs(m.bias))
        assert m.agg_rmse + 1e-9 >= np.linalg.norm(m.bias) / np.sqrt(p)


class TestReplicationDriver:
    def test_replication_seeds_are_distinct(self):
        seeds = {replication_seed(0, rep) for rep in range(200)}
        assert len(seeds) == 200
        assert replication_seed(0, 3) == replication_seed(0, 3)
        assert replication_seed(0, 3) != replication_seed(1, 3)

    def test_truth_stub_has_zero_error(self):
        spec = DgpSpec(n=50, p_z=2, p_x=2, seed=1)
        report = run_monte_carlo(
            spec, methods=[EstimatorConfig(kind="truth")], reps=3
        )
        m = report.method("truth")
        assert m.n_success == 3
        assert m.agg_bias_delta == 0.0
        assert m.agg_rmse_beta == 0.0

    def test_results_independent_of_worker_count(self):
        spec = DgpSpec(n=50, p_z=2, p_x=2, seed=5)
        methods = [EstimatorConfig(kind="truth")]
        serial = run_monte_carlo(spec, methods=methods, reps=4, workers=1)
        parallel = run_monte_carlo(spec, methods=methods, reps=4, workers=4)

        def strip_timing(report):
            rows = report_to_csv(report).strip().split("\n")
            return [",".join(r.split(",")[:-1]) for r in rows]

        assert strip_timing(serial) == strip_timing(parallel)

    def test_duplicate_method_names_rejected(self):
        spec = DgpSpec(n=50, p_z=2, p_x=2)
        methods = [EstimatorConfig(kind="truth"), EstimatorConfig(kind="truth")]
        with pytest.raises(ValueError, match="unique"):
            run_monte_carlo(spec, methods=methods, reps=1)

    def test_zero_reps_rejected(self):
        with pytest.raises(ValueError, match="reps"):
            run_monte_carlo(DgpSpec(n=50, p_z=2, p_x=2), reps=0)

    def test_estimator_failures_are_isolated(self):
        # Pin the selection index far below zero so no row is ever selected;
        # matching then fails per-rep while the truth stub still succeeds, and
        # the report flags the failure instead of raising.
        spec = DgpSpec(
            n=40, p_z=1, p_x=1, true_delta=(0.0,), seed=2, z0_const=-50.0
        )
        methods = [
            EstimatorConfig(kind="truth"),
            EstimatorConfig(kind="matching"),
        ]
        report = run_monte_carlo(spec, methods=methods, reps=2)
        assert report.method("truth").n_success == 2
        assert report.method("matching").failed
        assert np.isnan(report.method("matching").agg_bias_beta)

    def test_unknown_method_name_raises_keyerror(self):
        spec = DgpSpec(n=50, p_z=2, p_x=2)
        report = run_monte_carlo(spec, methods=[EstimatorConfig(kind="truth")], reps=1)
        with pytest.raises(KeyError):
            report.method("nope")


class TestWorkers:
    def test_explicit_argument_wins(self):
        assert resolve_workers(3) == 3
        assert resolve_workers(0) == 1

    def test_env_variable_fallback(self, monkeypatch):
        monkeypatch.setenv("SELABEL_WORKERS", "6")
        assert resolve_workers() == 6
        monkeypatch.delenv("SELABEL_WORKERS")
        assert resolve_workers() == 1


@pytest.fixture(scope="module")
def report() -> MonteCarloReport:
    spec = DgpSpec(n=60, p_z=2, p_x=2, seed=8)
    return run_monte_carlo(spec, methods=[EstimatorConfig(kind="truth")], reps=2)


class TestReportSerialization:
    def test_text_report_has_header_and_method_row(self, report):
        text = report_to_text(report)
        assert "B-d" in text and "R-b" in text
        assert "truth" in text
        assert "n=60" in text

    def test_csv_report_is_long_form(self, report):
        lines = report_to_csv(report).strip().split("\n")
        assert lines[0] == "method,coefficient,bias,rmse,time_seconds"
        names = [ln.split(",")[1] for ln in lines[1:]]
        assert names == ["delta_1", "delta_2", "beta_1", "beta_2"]
        assert all(ln.split(",")[2] == "0" for ln in lines[1:])
