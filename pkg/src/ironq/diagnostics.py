"""Residuals, influence measures and goodness-of-fit checks for fitted models."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from . import numdiff
from .distribution import iron_cdf, iron_sample
from .errors import RefitError, StateError, StructuralError
from .kernels import Family, Kernel, kernel_logcdf
from .parallel import pmap
from .regression import FitOptions, FitResult, case_loglik, fit as fit_model, fitted_distribution

__all__ = [
    "rqr",
    "gcd_quadratic_form",
    "gcd_exact",
    "gcd_approx",
    "relative_change",
    "normality_tests",
    "ks_test",
    "cvm_test",
    "ad_test",
    "envelope",
    "Envelope",
    "RCEntry",
    "DiagnosticsReport",
    "diagnose",
    "influence_threshold",
]

RQR_EPS = 1e-12
_NORMAL = Kernel(Family.NORMAL)


def _require_converged(f: FitResult):
    if not f.converged:
        raise StateError("diagnostics require a converged fit")


def _design(f: FitResult, y, X):
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape != (y.size, f.p):
        raise StructuralError(f"X must be ({y.size}, {f.p}), got {X.shape}")
    return y, X


# -- residuals ---------------------------------------------------------------


def rqr(f: FitResult, y, X, return_flags: bool = False):
    """Quantile residuals ``Phi^{-1}(G(y_i))`` under the fitted model.

    The response is continuous, so no randomization is involved.  CDF values
    within ``1e-12`` of 0 or 1 are clamped; ``return_flags=True`` also returns
    the boolean mask of clamped cases.
    """
    _require_converged(f)
    y, X = _design(f, y, X)
    u = iron_cdf(y, fitted_distribution(f, X))
    flags = (u < RQR_EPS) | (u > 1.0 - RQR_EPS)
    r = special.ndtri(np.clip(u, RQR_EPS, 1.0 - RQR_EPS))
    return (r, flags) if return_flags else r


# -- normality tests (fully specified N(0, 1) null) ---------------------------


def _finite(x):
    x = np.asarray(x, dtype=float).ravel()
    if x.size == 0 or not np.all(np.isfinite(x)):
        raise StructuralError("residuals must be a non-empty vector of finite values")
    return x


def ks_test(x):
    """Kolmogorov-Smirnov statistic and asymptotic p-value against N(0, 1)."""
    x = np.sort(_finite(x))
    n = x.size
    F = special.ndtr(x)
    i = np.arange(1, n + 1)
    d = max(np.max(i / n - F), np.max(F - (i - 1) / n))
    return float(d), float(special.kolmogorov(math.sqrt(n) * d))


def _cvm_cdf_inf(w):
    """Limiting CDF of the Cramer-von Mises statistic (Anderson & Darling, 1952 series)."""
    if w <= 0:
        return 0.0
    total = 0.0
    for k in range(30):
        a = (4 * k + 1) ** 2 / (16.0 * w)
        if a > 700:
            break
        coef = math.exp(special.gammaln(k + 0.5) - special.gammaln(0.5) - special.gammaln(k + 1))
        total += coef * math.sqrt(4 * k + 1) * math.exp(-a) * special.kv(0.25, a)
    return min(1.0, total / (math.pi * math.sqrt(w)))


def cvm_test(x):
    """Cramer-von Mises statistic and asymptotic p-value against N(0, 1)."""
    x = np.sort(_finite(x))
    n = x.size
    F = special.ndtr(x)
    i = np.arange(1, n + 1)
    w2 = 1.0 / (12 * n) + float(np.sum((F - (2 * i - 1) / (2.0 * n)) ** 2))
    return w2, max(0.0, 1.0 - _cvm_cdf_inf(w2))


def _ad_cdf_inf(z):
    """Limiting CDF of the Anderson-Darling statistic (Marsaglia & Marsaglia, 2004)."""
    if z <= 0:
        return 0.0
    if z < 2.0:
        poly = 2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z
        return math.exp(-1.2337141 / z) / math.sqrt(z) * poly
    inner = 1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z
    return math.exp(-math.exp(inner))


def ad_test(x):
    """Anderson-Darling statistic and asymptotic p-value against N(0, 1)."""
    x = np.sort(_finite(x))
    n = x.size
    logF = kernel_logcdf(_NORMAL, x)
    logS = kernel_logcdf(_NORMAL, -x)  # log(1 - F(x))
    i = np.arange(1, n + 1)
    a2 = -n - float(np.sum((2 * i - 1) * (logF + logS[::-1]))) / n
    return a2, min(1.0, max(0.0, 1.0 - _ad_cdf_inf(a2)))


def normality_tests(residuals) -> dict:
    """KS, CVM and AD tests of the residuals against the standard normal.

    Returns ``{"KS": (stat, p), "CVM": (stat, p), "AD": (stat, p)}``.
    """
    x = _finite(residuals)
    return {"KS": ks_test(x), "CVM": cvm_test(x), "AD": ad_test(x)}


# -- influence -----------------------------------------------------------------


def gcd_quadratic_form(delta, sigma_inv, q: Optional[int] = None):
    """``(1/q) d' S^{-1} d`` for a parameter shift ``d`` (rows of ``delta``)."""
    delta = np.atleast_2d(np.asarray(delta, dtype=float))
    q = delta.shape[1] if q is None else q
    return np.einsum("ij,jk,ik->i", delta, sigma_inv, delta) / q


def influence_threshold(q: int, n: int) -> float:
    """Benchmark above which a case is flagged as potentially influential: ``2 q / n``."""
    return 2.0 * q / n


def _sigma_inv(f: FitResult):
    if f.vcov is None:
        raise StateError("fit has no variance-covariance matrix")
    return np.linalg.inv(f.vcov)


def _refit_without(drop, y, X, f: FitResult, options: Optional[FitOptions]):
    keep = np.ones(y.size, dtype=bool)
    keep[list(drop)] = False
    opts = FitOptions() if options is None else FitOptions(**vars(options))
    opts.init_theta = f.theta
    return fit_model(y[keep], f.spec_for(X[keep]), opts)


def _loo_task(i, y, X, f, options):
    try:
        g = _refit_without([i], y, X, f, options)
    except Exception:
        return None
    return g.theta if g.converged else None


def gcd_exact(f: FitResult, y, X, options: Optional[FitOptions] = None, n_jobs=None):
    """Generalized Cook's distance by leave-one-out refits (warm-started at the fit).

    Cases whose refit fails to converge are returned as NaN.
    """
    _require_converged(f)
    y, X = _design(f, y, X)
    if y.size < f.q + 2:
        raise StructuralError("need at least q + 2 cases")
    sinv = _sigma_inv(f)
    thetas = pmap(partial(_loo_task, y=y, X=X, f=f, options=options), range(y.size), n_jobs)
    out = np.full(y.size, np.nan)
    for i, th in enumerate(thetas):
        if th is not None:
            out[i] = gcd_quadratic_form(f.theta - th, sinv, f.q)[0]
    return out


def _case_derivatives(f: FitResult, y, X):
    spec = f.spec_for(X)

    def per_case(theta):
        return case_loglik(theta, y, spec)

    theta = f.theta
    scores = numdiff.gradient(per_case, theta)  # (n, q)
    hess = numdiff.case_hessians(per_case, theta)  # (n, q, q)
    return scores, hess


def gcd_approx(f: FitResult, y, X):
    """One-step approximation to the generalized Cook's distance.

    Uses the case-deleted score and Hessian at the full-data estimate,
    ``(1/q) s_(i)' H_(i)^{-1} (-H) H_(i)^{-1} s_(i)``; entries with a singular
    case-deleted Hessian are NaN.
    """
    _require_converged(f)
    y, X = _design(f, y, X)
    scores, hess = _case_derivatives(f, y, X)
    H = hess.sum(axis=0)
    g = scores.sum(axis=0)
    q = f.q
    out = np.full(y.size, np.nan)
    for i in range(y.size):
        Hi = H - hess[i]
        si = g - scores[i]
        try:
            d = np.linalg.solve(Hi, si)
        except np.linalg.LinAlgError:
            continue
        out[i] = float(d @ (-H) @ d) / q
    return out


@dataclass
class RCEntry:
    """Relative changes (percent) after deleting ``dropped`` and refitting."""

    dropped: list
    param_names: list
    estimate: list
    estimate_dropped: list
    rc_estimate: list
    se: Optional[list]
    se_dropped: Optional[list]
    rc_se: Optional[list]
    p_value_dropped: Optional[list]


def _rc(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.abs((a - b) / a) * 100.0


def relative_change(f: FitResult, y, X, drop_set: Sequence[int] = (),
                    options: Optional[FitOptions] = None) -> RCEntry:
    """Percent change of each estimate and its s.e. when ``drop_set`` is removed."""
    _require_converged(f)
    y, X = _design(f, y, X)
    drop = sorted({int(i) for i in drop_set})
    if any(i < 0 or i >= y.size for i in drop):
        raise StructuralError(f"drop set {drop} has indices outside 0..{y.size - 1}")
    if drop:
        try:
            g = _refit_without(drop, y, X, f, options)
        except Exception as exc:
            raise RefitError(f"refit without cases {drop} failed: {exc}") from exc
        if not g.converged:
            raise RefitError(f"refit without cases {drop} did not converge")
    else:
        g = f
    se = None if f.se is None else f.se.tolist()
    se_d = None if g.se is None else g.se.tolist()
    rc_se = None if (se is None or se_d is None) else _rc(se, se_d).tolist()
    pv = g.wald_pvalues()
    return RCEntry(
        dropped=drop,
        param_names=list(f.param_names),
        estimate=f.theta.tolist(),
        estimate_dropped=g.theta.tolist(),
        rc_estimate=_rc(f.theta, g.theta).tolist(),
        se=se,
        se_dropped=se_d,
        rc_se=rc_se,
        p_value_dropped=None if pv is None else pv.tolist(),
    )


# -- envelope ------------------------------------------------------------------


@dataclass
class Envelope:
    lower: np.ndarray
    median: np.ndarray
    upper: np.ndarray
    observed: np.ndarray
    level: float
    replicates: int
    failed: int

    def coverage(self) -> float:
        """Fraction of observed sorted residuals inside the bands."""
        inside = (self.observed >= self.lower) & (self.observed <= self.upper)
        return float(np.mean(inside))


def _envelope_task(seed, y, X, f, refit, options):
    dist = fitted_distribution(f, X)
    rng = np.random.default_rng(seed)
    ys = iron_sample(y.size, dist, rng)
    g = f
    if refit:
        try:
            g = _refit_on(ys, X, f, options)
        except Exception:
            return None
        if not g.converged:
            return None
    return np.sort(rqr(g, ys, X))


def _refit_on(ys, X, f, options):
    opts = FitOptions() if options is None else FitOptions(**vars(options))
    opts.init_theta = f.theta
    return fit_model(ys, f.spec_for(X), opts)


def envelope(f: FitResult, y, X, replicates: int = 100, level: float = 0.95,
             refit: bool = True, seed: int = 0, options: Optional[FitOptions] = None,
             n_jobs=None) -> Envelope:
    """Simulated pointwise bands for the sorted quantile residuals.

    Each replicate draws a response vector from the fitted model, optionally
    refits, and sorts its residuals.  More than 20% failed refits is an error.
    """
    _require_converged(f)
    y, X = _design(f, y, X)
    if replicates < 20:
        raise StructuralError("envelope needs at least 20 replicates")
    if not (0.5 < level < 1.0):
        raise StructuralError("level must lie in (0.5, 1)")
    seeds = np.random.SeedSequence(seed).spawn(replicates)
    sims = pmap(partial(_envelope_task, y=y, X=X, f=f, refit=refit, options=options), seeds, n_jobs)
    good = [s for s in sims if s is not None]
    failed = replicates - len(good)
    if failed > 0.2 * replicates:
        raise RefitError(f"{failed} of {replicates} envelope refits failed")
    R = np.vstack(good)
    lo, med, hi = np.quantile(R, [(1.0 - level) / 2.0, 0.5, (1.0 + level) / 2.0], axis=0)
    return Envelope(lo, med, hi, np.sort(rqr(f, y, X)), level, replicates, failed)


# -- report ----------------------------------------------------------------------

SCHEMA_VERSION = 1


@dataclass
class DiagnosticsReport:
    rqr: np.ndarray
    rqr_clamped: np.ndarray
    gcd_approx: np.ndarray
    gcd_exact: Optional[np.ndarray]
    threshold: float
    influential: list
    rc_table: list
    tests: dict
    envelope: Optional[Envelope] = None
    fit: Optional[FitResult] = field(default=None, repr=False)

    @property
    def n_influential(self) -> int:
        return len(self.influential)

    def to_dict(self) -> dict:
        def arr(a):
            if a is None:
                return None
            return [None if not np.isfinite(v) else float(v) for v in np.asarray(a, dtype=float)]

        env = None
        if self.envelope is not None:
            e = self.envelope
            env = {
                "level": e.level,
                "replicates": e.replicates,
                "failed": e.failed,
                "lower": arr(e.lower),
                "median": arr(e.median),
                "upper": arr(e.upper),
                "observed": arr(e.observed),
                "coverage": e.coverage(),
            }
        return {
            "schema_version": SCHEMA_VERSION,
            "fit": None if self.fit is None else self.fit.to_dict(),
            "rqr": arr(self.rqr),
            "rqr_clamped": [bool(v) for v in self.rqr_clamped],
            "gcd_approx": arr(self.gcd_approx),
            "gcd_exact": arr(self.gcd_exact),
            "threshold": self.threshold,
            "influential": list(self.influential),
            "n_influential": self.n_influential,
            "rc_table": [vars(e) for e in self.rc_table],
            "tests": {k: {"statistic": v[0], "p_value": v[1]} for k, v in self.tests.items()},
            "envelope": env,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        """Per-case vectors: index, rqr, gcd_approx, gcd_exact, flags."""
        rows = ["index,rqr,gcd_approx,gcd_exact,rqr_clamped,influential"]
        infl = set(self.influential)
        for i in range(self.rqr.size):
            ge = "" if self.gcd_exact is None or not np.isfinite(self.gcd_exact[i]) else repr(float(self.gcd_exact[i]))
            ga = "" if not np.isfinite(self.gcd_approx[i]) else repr(float(self.gcd_approx[i]))
            rows.append(
                f"{i},{float(self.rqr[i])!r},{ga},{ge},{int(self.rqr_clamped[i])},{int(i in infl)}"
            )
        return "\n".join(rows) + "\n"


def diagnose(f: FitResult, y, X, exact: bool = True, envelope_replicates: int = 100,
             envelope_level: float = 0.95, envelope_refit: bool = True, seed: int = 0,
             threshold: Optional[float] = None, options: Optional[FitOptions] = None,
             n_jobs=None) -> DiagnosticsReport:
    """Full diagnostics pipeline.

    Cases whose GCD (exact when computed, else approximate) exceeds
    ``threshold`` (default ``2 q / n``) are flagged; RC entries are computed
    for each flagged case and for all of them jointly.  Set
    ``envelope_replicates=0`` to skip the envelope.
    """
    _require_converged(f)
    y, X = _design(f, y, X)
    r, clamped = rqr(f, y, X, return_flags=True)
    ga = gcd_approx(f, y, X)
    ge = gcd_exact(f, y, X, options, n_jobs) if exact else None
    thr = influence_threshold(f.q, y.size) if threshold is None else float(threshold)
    ref = ge if ge is not None else ga
    influential = [int(i) for i in np.flatnonzero(np.nan_to_num(ref, nan=-np.inf) > thr)]
    rc_table = []
    sets = [[i] for i in influential]
    if len(influential) > 1:
        sets.append(list(influential))
    for s in sets:
        try:
            rc_table.append(relative_change(f, y, X, s, options))
        except RefitError:
            continue
    env = None
    if envelope_replicates:
        env = envelope(f, y, X, envelope_replicates, envelope_level, envelope_refit, seed, options, n_jobs)
    return DiagnosticsReport(
        rqr=r,
        rqr_clamped=clamped,
        gcd_approx=ga,
        gcd_exact=ge,
        threshold=thr,
        influential=influential,
        rc_table=rc_table,
        tests=normality_tests(r),
        envelope=env,
        fit=f,
    )
