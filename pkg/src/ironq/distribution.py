"""The IRON law: an exponentiated Birnbaum-Saunders distribution on an elliptical kernel.

With ``a_t = (sqrt(t/beta) - sqrt(beta/t)) / lam`` the CDF is ``F(a_t)**alpha``.
Choosing ``alpha = alpha_tau(tau)`` makes ``beta`` the ``tau``-th quantile.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError
from .kernels import (
    Kernel,
    kernel_logcdf,
    kernel_logpdf,
    kernel_quantile,
)

__all__ = [
    "IronParams",
    "alpha_tau",
    "a_t",
    "bs_factor",
    "iron_logpdf_terms",
    "iron_logpdf",
    "iron_pdf",
    "iron_cdf",
    "iron_logcdf",
    "iron_quantile",
    "iron_sample",
    "bs_quantile_from_z",
    "rho",
]

LOG2 = math.log(2.0)


def alpha_tau(tau: float) -> float:
    """Exponent that pins ``beta`` at the ``tau`` quantile: ``-log(tau)/log(2)``."""
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise DomainError(f"tau must lie in (0, 1), got {tau!r}")
    return -math.log(tau) / LOG2


@dataclass(frozen=True)
class IronParams:
    """Parameters ``(beta, lam, alpha)`` and kernel of an IRON distribution.

    ``beta`` may be an array (one scale per observation); ``lam`` and ``alpha``
    are scalars.
    """

    beta: object
    lam: float
    alpha: float
    kernel: Kernel

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if not np.all(np.isfinite(beta)) or np.any(beta <= 0):
            raise ParameterError("beta must be finite and > 0")
        for name in ("lam", "alpha"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0:
                raise ParameterError(f"{name} must be finite and > 0, got {v!r}")
            object.__setattr__(self, name, v)
        if beta.ndim == 0:
            object.__setattr__(self, "beta", float(beta))
        else:
            object.__setattr__(self, "beta", beta)

    @classmethod
    def at_quantile(cls, beta, lam: float, tau: float, kernel: Kernel) -> "IronParams":
        """Parameters whose ``tau`` quantile equals ``beta``."""
        return cls(beta, lam, alpha_tau(tau), kernel)


def _positive(t):
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError("t must be > 0")
    return t, scalar


def a_t(t, beta, lam):
    """Standardized argument ``(sqrt(t/beta) - sqrt(beta/t)) / lam``."""
    r = np.sqrt(t / beta)
    return (r - 1.0 / r) / lam


def bs_factor(t, beta, lam):
    """Jacobian ``da_t/dt = t**-1.5 (t + beta) / (2 lam sqrt(beta))``."""
    return t ** -1.5 * (t + beta) / (2.0 * lam * np.sqrt(beta))


def iron_logpdf_terms(t, beta, lam, alpha, kernel: Kernel):
    """Return the kernel-specific and Birnbaum-Saunders common parts of ``log g``.

    specific = log k(a_t^2) + (alpha - 1) log F(a_t)
    common   = log alpha - 1.5 log t + log(t + beta) - log(2 lam) - 0.5 log beta
    """
    a = a_t(t, beta, lam)
    specific = kernel_logpdf(kernel, a)
    if alpha != 1.0:
        specific = specific + (alpha - 1.0) * kernel_logcdf(kernel, a)
    common = (
        math.log(alpha)
        - 1.5 * np.log(t)
        + np.log(t + beta)
        - math.log(2.0 * lam)
        - 0.5 * np.log(beta)
    )
    return specific, common


def iron_logpdf(t, p: IronParams):
    t, scalar = _positive(t)
    s, c = iron_logpdf_terms(t, p.beta, p.lam, p.alpha, p.kernel)
    out = s + c
    return float(out) if scalar else out


def iron_pdf(t, p: IronParams):
    t, scalar = _positive(t)
    out = np.exp(iron_logpdf(t, p))
    return float(out) if scalar else out


def iron_logcdf(t, p: IronParams):
    t, scalar = _positive(t)
    out = p.alpha * kernel_logcdf(p.kernel, a_t(t, p.beta, p.lam))
    return float(out) if scalar else out


def iron_cdf(t, p: IronParams):
    """``F(a_t)**alpha``; equals ``0.5**alpha`` exactly at ``t = beta``."""
    t, scalar = _positive(t)
    a = a_t(t, p.beta, p.lam)
    out = np.exp(p.alpha * kernel_logcdf(p.kernel, a))
    out = np.where(a == 0.0, 0.5 ** p.alpha, out)
    return float(out) if scalar else out


def bs_quantile_from_z(z, beta, lam):
    """``(beta/4) (lam z + sqrt(lam^2 z^2 + 4))^2`` without cancellation for z < 0."""
    lz = lam * np.asarray(z, dtype=float)
    root = np.sqrt(lz * lz + 4.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(lz >= 0.0, lz + root, 4.0 / (root - lz))
    return 0.25 * beta * inner * inner


def iron_quantile(u, p: IronParams):
    """Quantile function; ``iron_quantile(tau)`` is ``beta`` when ``alpha = alpha_tau(tau)``."""
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise DomainError("u must lie strictly inside (0, 1)")
    v = np.exp(np.log(u) / p.alpha)
    # exp(log(0.5**alpha)/alpha) can miss 0.5 by an ulp
    v = np.where(np.isclose(v, 0.5, rtol=0.0, atol=4e-16), 0.5, v)
    v = np.clip(v, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    z = kernel_quantile(p.kernel, v)
    # z = -inf (heavy tails at extreme levels) would give t = 0, outside the support
    out = np.maximum(bs_quantile_from_z(z, p.beta, p.lam), np.finfo(float).tiny)
    return float(out) if scalar else out


def iron_sample(n: int, p: IronParams, seed=None):
    """Draw ``n`` variates by inverse transform.

    ``seed`` may be an int, a ``numpy.random.SeedSequence`` or a ``Generator``.
    If ``p.beta`` is an array its length must equal ``n``.
    """
    n = int(n)
    if n < 1:
        raise ParameterError("n must be >= 1")
    if np.ndim(p.beta) and np.size(p.beta) != n:
        raise ParameterError("length of beta must equal n")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    u = rng.random(n)
    # rng.random is in [0, 1); 0 has probability 2**-53 but must be excluded
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return iron_quantile(u, p)



def rho(u, tau: float):
    """Ratio of the ``tau`` quantile to the median of a BS law with shape ``u``.

    ``0.25 (u z + sqrt(u^2 z^2 + 4))^2`` with ``z`` the standard normal
    ``tau`` quantile; identically 1 at ``tau = 1/2``.
    """
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if np.any(~(u > 0)):
        raise DomainError("rho requires u > 0")
    if not (0.0 < float(tau) < 1.0):
        raise DomainError(f"tau must lie in (0, 1), got {tau!r}")
    z = 0.0 if tau == 0.5 else float(special.ndtri(tau))
    out = bs_quantile_from_z(z, 1.0, u)
    return float(out) if scalar else out
