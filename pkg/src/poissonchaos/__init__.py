"""Discrete Poisson chaos: kernels, star contractions, exact moments and universality checks."""

from .contract import ContractionTable, contraction_table, gamma_operator, prop41_residuals, star
from .errors import BudgetExceeded, ChaosError, ValidationError
from .experiments import (
    counterexample_family,
    pair_partition_family,
    q1_escape_family,
    universality_run,
    vector_diagnose,
)
from .kernels import (
    GeneralKernel,
    SymmetricKernel,
    WeightVector,
    build_symmetric,
    embed,
    inner_product,
    l2_norm,
    p_integral,
    symmetrize,
)
from .moments import (
    MomentProvider,
    central_moment,
    cross_covariance,
    diagnose,
    fourth_moment_structured,
    moment_bruteforce,
    poisson_central_moment,
    variance_exact,
)
from .montecarlo import RngSpec, distances, eval_sums, normal_cdf, normal_quantile, sample_matrix, simulate

__version__ = "0.1.0"
