import numpy as np
import pytest

from ironq import IronParams, iron_sample, parse_kernel, parse_link

ALL_KERNELS = ["normal", "t:4", "logistic", "ep:2", "cauchy"]


def simulate_regression(n, kernel="normal", tau=0.5, lam=0.5, gamma=(2.0, 1.5, -0.5),
                        link="identity", seed=0):
    """Uniform covariates, beta = link^{-1}(X gamma), IRON responses pinned at tau."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.random((n, len(gamma) - 1))])
    beta = parse_link(link).inverse(X @ np.asarray(gamma, dtype=float))
    y = iron_sample(n, IronParams.at_quantile(beta, lam, tau, parse_kernel(kernel)), rng)
    return y, X


@pytest.fixture
def regression_data():
    return simulate_regression
