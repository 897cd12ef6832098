"""Semiparametric estimation for binary outcomes observed under selection."""

from selabel.basis import (
    AffineMap,
    SieveBasis,
    SieveCoefficients,
    legendre_univariate,
    select_order_aic,
    sieve_ols_fit,
    tensor_bivariate,
)
from selabel.errors import (
    DimensionError,
    DivergenceError,
    EstimationError,
    InsufficientDataError,
    SchemaError,
    SingularBasisError,
)
from selabel.model import Dataset, ParameterPoint, outcome_index, selection_index
from selabel.multichoice import ChoiceDataset, choice_knn_weights, multinomial_estimate
from selabel.parametric import (
    OptimizerConfig,
    ParametricFit,
    bivariate_normal_cdf,
    joint_mle,
    two_step_nls,
)
from selabel.simlab import (
    DgpSpec,
    EstimatorConfig,
    MonteCarloReport,
    aggregate_metrics,
    generate_dataset,
    run_monte_carlo,
)
from selabel.stage1 import FirstStageFit, GdConfig, sbgd_first_stage, sbgd_step
from selabel.stage2 import (
    MatchingTermination,
    NeighborWeights,
    SecondStageFit,
    knn_weights,
    matching_estimate,
    sieve_estimate,
)

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "ChoiceDataset",
    "Dataset",
    "DgpSpec",
    "DimensionError",
    "DivergenceError",
    "EstimationError",
    "EstimatorConfig",
    "FirstStageFit",
    "GdConfig",
    "InsufficientDataError",
    "MatchingTermination",
    "MonteCarloReport",
    "NeighborWeights",
    "OptimizerConfig",
    "ParameterPoint",
    "ParametricFit",
    "SchemaError",
    "SecondStageFit",
    "SieveBasis",
    "SieveCoefficients",
    "SingularBasisError",
    "aggregate_metrics",
    "bivariate_normal_cdf",
    "choice_knn_weights",
    "generate_dataset",
    "joint_mle",
    "knn_weights",
    "legendre_univariate",
    "matching_estimate",
    "multinomial_estimate",
    "outcome_index",
    "run_monte_carlo",
    "sbgd_first_stage",
    "sbgd_step",
    "select_order_aic",
    "selection_index",
    "sieve_estimate",
    "sieve_ols_fit",
    "tensor_bivariate",
    "two_step_nls",
]
