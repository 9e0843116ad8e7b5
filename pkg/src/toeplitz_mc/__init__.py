"""Toeplitz Monte Carlo: sliding-window estimators with FFT-fast linear stages.

Modules
-------
toeplitz     implicit Toeplitz sample matrices and circulant-embedding products
sampling     seeded scalar streams (xoshiro256**), inverse normal CDF, MVN points
estimators   MC / TMC estimators, replication statistics, relative efficiency
anova        exact ANOVA effects and the variance of both estimators
fem1d        1D diffusion benchmarks (uniform and log-normal coefficients)
fem2d        2D diffusion benchmark on a right-triangle mesh, BiCGSTAB solver
harness      experiment configs, ladders, records and CSV output
cli          the ``tmc-bench`` command
"""

from .anova import (
    AnovaDecomposition,
    anova_decompose,
    corollary_bound,
    enumerate_variance_exact,
    gauss_hermite_law,
    gauss_legendre_law,
    mc_variance,
    tmc_variance_theorem,
    two_point_law,
)
from .estimators import (
    EstimateResult,
    Integrand,
    ReplicationStats,
    efficiency,
    mc_estimate,
    parallel_tmc_average,
    replicate,
    tmc_estimate,
)
from .sampling import Law, SampleStream, generate_mvn, make_stream, normal_inverse_cdf, random_upper_factor
from .toeplitz import ToeplitzOperator, block_matmat, build_operator, fast_matmat, fast_matvec, naive_matvec

__version__ = "0.1.0"

__all__ = [
    "AnovaDecomposition",
    "anova_decompose",
    "corollary_bound",
    "enumerate_variance_exact",
    "gauss_hermite_law",
    "gauss_legendre_law",
    "mc_variance",
    "tmc_variance_theorem",
    "two_point_law",
    "EstimateResult",
    "Integrand",
    "ReplicationStats",
    "efficiency",
    "mc_estimate",
    "parallel_tmc_average",
    "replicate",
    "tmc_estimate",
    "Law",
    "SampleStream",
    "generate_mvn",
    "make_stream",
    "normal_inverse_cdf",
    "random_upper_factor",
    "ToeplitzOperator",
    "block_matmat",
    "build_operator",
    "fast_matmat",
    "fast_matvec",
    "naive_matvec",
]
