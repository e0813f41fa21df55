"""Quantile regression on exponentiated Birnbaum-Saunders (IRON) distributions."""
__version__ = "0.1.0"

from .distribution import (
    IronParams,
    alpha_tau,
    iron_cdf,
    iron_logpdf,
    iron_pdf,
    iron_quantile,
    iron_sample,
    rho,
)
from .kernels import Family, Kernel, kernel_cdf, kernel_density, kernel_quantile, parse_kernel
from .links import LinkFunction, parse_link
from .regression import FitOptions, FitResult, RegressionSpec, fit, loglik, predict_quantile
from .rbsq import map_across_tau, rbsq_fit
from .diagnostics import diagnose, gcd_approx, gcd_exact, normality_tests, relative_change, rqr
from .montecarlo import ScenarioConfig, StudyResult, run_bias_rmse, run_model_selection

__all__ = [
    "__version__",
    "IronParams", "alpha_tau", "iron_cdf", "iron_logpdf", "iron_pdf", "iron_quantile",
    "iron_sample", "rho",
    "Family", "Kernel", "kernel_cdf", "kernel_density", "kernel_quantile", "parse_kernel",
    "LinkFunction", "parse_link",
    "FitOptions", "FitResult", "RegressionSpec", "fit", "loglik", "predict_quantile",
    "map_across_tau", "rbsq_fit",
    "diagnose", "gcd_approx", "gcd_exact", "normality_tests", "relative_change", "rqr",
    "ScenarioConfig", "StudyResult", "run_bias_rmse", "run_model_selection",
]
