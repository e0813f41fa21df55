"""Quantile-parametrized Birnbaum-Saunders regression (the RBSQ baseline).

A BS(lam, beta) law has ``tau`` quantile ``Q = beta * rho_tau(lam)``.  The
regression ``link(Q_i) = x_i' psi`` therefore gives the same likelihood for
every ``tau`` once an intercept can absorb the change; :func:`map_across_tau`
carries the estimates from one ``tau`` to another in closed form.
"""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .distribution import rho
from .errors import StateError, StructuralError
from .links import LinkFamily, parse_link
from .regression import FitOptions, FitResult, RegressionSpec, _intercept_index, fit

__all__ = ["rho", "rbsq_spec", "rbsq_fit", "map_across_tau"]


def rbsq_spec(X, link="identity", tau: float = 0.5, names=None) -> RegressionSpec:
    return RegressionSpec(X, tau, parse_link(link), "normal", model="rbsq", names=names)


def rbsq_fit(y, X, link="identity", tau: float = 0.5,
             options: Optional[FitOptions] = None, names=None) -> FitResult:
    """Fit the RBSQ model at quantile level ``tau``."""
    return fit(y, rbsq_spec(X, link, tau, names), options)


def map_across_tau(fit_at_tau: FitResult, tau_star: float, X=None) -> np.ndarray:
    """Map ``(psi, lam)`` estimated at ``tau`` to the equivalent ``tau_star`` parameters.

    log link: the intercept moves by ``log rho_{tau*}(lam) - log rho_tau(lam)``;
    identity link: all coefficients scale by ``rho_{tau*}/rho_tau``;
    sqrt link: by the square root of that ratio.  ``lam`` is unchanged.

    For the log link ``X`` (the design used for the fit) locates the
    intercept column; when omitted the first coefficient is taken as the
    intercept.
    """
    f = fit_at_tau
    if f.model != "rbsq":
        raise StructuralError("map_across_tau applies to rbsq fits only")
    if not f.converged:
        raise StateError("map_across_tau requires a converged fit")
    if not (0.0 < tau_star < 1.0):
        raise StructuralError("tau_star must lie in (0, 1)")
    fam = f.link.family
    j, scale_j = 0, 1.0
    if X is not None and fam is LinkFamily.LOG:
        j = _intercept_index(np.asarray(X, dtype=float))
        if j is None:
            raise StructuralError("the log-link mapping needs an intercept column")
        scale_j = float(np.asarray(X)[0, j])
    lam = f.lambda_hat
    ratio = rho(lam, tau_star) / rho(lam, f.tau)
    psi = np.asarray(f.gamma_hat, dtype=float).copy()
    if fam is LinkFamily.LOG:
        psi[j] += math.log(ratio) / scale_j
    elif fam is LinkFamily.IDENTITY:
        psi *= ratio
    else:
        psi *= math.sqrt(ratio)
    return np.concatenate([psi, [lam]])
