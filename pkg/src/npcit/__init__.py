"""Nonparametric conditional residuals and conditional independence testing.

The package estimates conditional distribution functions by kernel
smoothing, maps observations through the conditional probability
transform, tests the transformed sample for standard multivariate
normality with an energy statistic, and calibrates that test with a
model-based bootstrap. A distance-covariance permutation test on the pair
of residuals is included as the partial-correlation style comparison.
"""

from .citest import CiTestConfig, CiTestResult, bootstrap_replicate, pvalue_histogram, run_test
from .core import Dataset, SeedSpec, ln_gamma, make_stream, std_normal_cdf, std_normal_quantile
from .dcov import DcovResult, distance_covariance, partial_dcov, permutation_independence_test
from .energy import (
    EnergyGofResult,
    energy_statistic,
    expected_distance_to_std_normal,
    null_pair_expectation,
)
from .kernel_cde import Bandwidths, ConditionalCdfModel, ExtrapolationWarning, fit, select_bandwidths
from .simgen import (
    SCENARIOS,
    GaussianOracleChain,
    GaussianOracleModel,
    Scenario,
    gaussian_latent_oracles,
    gaussian_oracle_residual,
    gen_gaussian_latent,
    gen_modulo_counterexample,
    gen_pairwise_gaussian,
    generate,
    make_scenario,
)
from .transform import (
    ResidualVector,
    RosenblattChain,
    build_residual_vector,
    fit_rosenblatt,
    ks_uniform_distance,
    residual,
)

__version__ = "0.1.0"
