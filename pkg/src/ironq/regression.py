"""Maximum-likelihood quantile regression on the IRON family.

The ``tau``-th conditional quantile ``beta_i`` is linked to the linear
predictor, ``link(beta_i) = x_i' gamma``, and the IRON exponent is pinned at
``alpha_tau(tau)``.  The shape ``lam`` is common to all cases; the kernel
shape (t degrees of freedom, EP exponent) is estimated by default.

The same machinery fits the quantile-parametrized Birnbaum-Saunders model
(``model="rbsq"``): Normal kernel, ``alpha = 1`` and ``beta_i = Q_i / rho_tau(lam)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from . import numdiff, optimize
from .distribution import IronParams, alpha_tau, iron_logpdf_terms, rho
from .errors import DomainError, StateError, StructuralError
from .kernels import SHAPE_MIN, Family, Kernel, parse_kernel
from .links import LinkFamily, LinkFunction, parse_link

__all__ = [
    "RegressionSpec",
    "FitOptions",
    "FitResult",
    "case_loglik",
    "loglik",
    "loglik_terms",
    "fit",
    "predict_quantile",
    "fitted_distribution",
    "information_criteria",
    "aic_bic",
]

SHAPE_MAX = 1e6
SCHEMA_VERSION = 1
RANK_TOL = 1e-10
MODELS = ("iron", "rbsq")


def _intercept_index(X) -> Optional[int]:
    for j in range(X.shape[1]):
        col = X[:, j]
        if np.all(col == col[0]) and col[0] != 0:
            return j
    return None


@dataclass
class RegressionSpec:
    """Design matrix plus model choices for one quantile regression.

    ``estimate_shape`` defaults to True for the t and EP kernels; when False
    the kernel's own shape is held fixed.
    """

    X: np.ndarray
    tau: float
    link: LinkFunction = field(default_factory=LinkFunction)
    kernel: Kernel = field(default_factory=lambda: Kernel(Family.NORMAL))
    estimate_shape: Optional[bool] = None
    model: str = "iron"
    names: Optional[Sequence[str]] = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise StructuralError("X must be a 2-d design matrix")
        if not np.all(np.isfinite(X)):
            raise StructuralError("X contains non-finite values")
        n, p = X.shape
        if not n > p:
            raise StructuralError(f"need more cases than columns (n={n}, p={p})")
        sv = np.linalg.svd(X, compute_uv=False)
        if sv[-1] <= RANK_TOL * sv[0]:
            raise StructuralError("design matrix is rank deficient")
        self.X = X
        self.tau = float(self.tau)
        if not (0.0 < self.tau < 1.0):
            raise DomainError(f"tau must lie in (0, 1), got {self.tau!r}")
        self.link = parse_link(self.link)
        self.kernel = parse_kernel(self.kernel)
        if self.model not in MODELS:
            raise StructuralError(f"unknown model {self.model!r}")
        if self.model == "rbsq" and self.kernel.family is not Family.NORMAL:
            raise StructuralError("the rbsq model uses the Normal kernel")
        if self.estimate_shape is None:
            self.estimate_shape = self.kernel.has_shape
        self.estimate_shape = bool(self.estimate_shape and self.kernel.has_shape)
        if self.names is not None:
            if len(self.names) != p:
                raise StructuralError("names must match the columns of X")
            self.names = list(self.names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return self.p + 1 + int(self.estimate_shape)

    @property
    def alpha(self) -> float:
        return 1.0 if self.model == "rbsq" else alpha_tau(self.tau)

    @property
    def intercept_index(self) -> Optional[int]:
        return _intercept_index(self.X)

    def param_names(self) -> list:
        names = list(self.names) if self.names else [f"gamma{j + 1}" for j in range(self.p)]
        names.append("lambda")
        if self.estimate_shape:
            names.append("xi" if self.kernel.family is Family.STUDENT_T else "kappa")
        return names

    def with_design(self, X) -> "RegressionSpec":
        return replace(self, X=X)


@dataclass
class FitOptions:
    max_iter: int = 500
    grad_tol: float = 1e-6
    step_tol: float = 1e-8
    fix_shape: bool = False
    init_gamma: Optional[Sequence[float]] = None
    init_lambda: Optional[float] = None
    init_shape: Optional[float] = None
    init_theta: Optional[Sequence[float]] = None  # full natural-scale vector; wins over the others


@dataclass
class FitResult:
    gamma_hat: np.ndarray
    lambda_hat: float
    shape_hat: Optional[float]
    loglik: float
    aic: float
    bic: float
    vcov: Optional[np.ndarray]
    se: Optional[np.ndarray]
    converged: bool
    iterations: int
    tau: float
    kernel: Kernel
    link: LinkFunction
    n: int
    model: str = "iron"
    estimate_shape: bool = False
    param_names: list = field(default_factory=list)
    vcov_error: Optional[str] = None
    vcov_method: str = "hessian"
    message: str = ""
    grad_max: float = float("nan")

    @property
    def theta(self) -> np.ndarray:
        parts = [np.asarray(self.gamma_hat, dtype=float), [self.lambda_hat]]
        if self.estimate_shape:
            parts.append([self.shape_hat])
        return np.concatenate(parts)

    @property
    def q(self) -> int:
        return self.theta.size

    @property
    def p(self) -> int:
        return len(self.gamma_hat)

    @property
    def alpha(self) -> float:
        return 1.0 if self.model == "rbsq" else alpha_tau(self.tau)

    def spec_for(self, X, names=None) -> RegressionSpec:
        """A RegressionSpec reproducing this fit's model on design ``X``."""
        return RegressionSpec(
            X, self.tau, self.link, self.kernel, self.estimate_shape, self.model,
            names=names,
        )

    def wald_pvalues(self) -> Optional[np.ndarray]:
        if self.se is None:
            return None
        z = self.theta / self.se
        return 2.0 * stats.norm.sf(np.abs(z))

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else np.asarray(a, dtype=float).tolist()

        return {
            "schema_version": SCHEMA_VERSION,
            "model": self.model,
            "tau": self.tau,
            "kernel": self.kernel.family.value,
            "kernel_shape": self.kernel.shape,
            "estimate_shape": self.estimate_shape,
            "link": self.link.name,
            "n": self.n,
            "param_names": list(self.param_names),
            "gamma_hat": arr(self.gamma_hat),
            "lambda_hat": self.lambda_hat,
            "shape_hat": self.shape_hat,
            "theta": arr(self.theta),
            "se": arr(self.se),
            "vcov": arr(self.vcov),
            "vcov_error": self.vcov_error,
            "vcov_method": self.vcov_method,
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
            "iterations": self.iterations,
            "message": self.message,
            "grad_max": self.grad_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        kernel = Kernel(Family(d["kernel"]), d.get("kernel_shape"))

        def arr(a):
            return None if a is None else np.asarray(a, dtype=float)

        return cls(
            gamma_hat=arr(d["gamma_hat"]),
            lambda_hat=float(d["lambda_hat"]),
            shape_hat=d.get("shape_hat"),
            loglik=float(d["loglik"]),
            aic=float(d["aic"]),
            bic=float(d["bic"]),
            vcov=arr(d.get("vcov")),
            se=arr(d.get("se")),
            converged=bool(d["converged"]),
            iterations=int(d["iterations"]),
            tau=float(d["tau"]),
            kernel=kernel,
            link=parse_link(d["link"]),
            n=int(d["n"]),
            model=d.get("model", "iron"),
            estimate_shape=bool(d.get("estimate_shape", False)),
            param_names=list(d.get("param_names", [])),
            vcov_error=d.get("vcov_error"),
            vcov_method=d.get("vcov_method", "hessian"),
            message=d.get("message", ""),
            grad_max=float(d.get("grad_max", float("nan"))),
        )

    def table(self) -> str:
        """Plain-text coefficient table."""
        title = "RBSQ" if self.model == "rbsq" else f"RIRON-{self.kernel.family.value}"
        lines = [
            f"{title}  tau={self.tau:g}  link={self.link.name}  n={self.n}  converged={self.converged}",
            f"{'parameter':<12}{'estimate':>14}{'s.e.':>12}{'p-value':>10}",
        ]
        pv = self.wald_pvalues()
        for j, (name, est) in enumerate(zip(self.param_names, self.theta)):
            se = "-" if self.se is None else f"{self.se[j]:.4f}"
            p = "-" if pv is None else f"{pv[j]:.4f}"
            lines.append(f"{name:<12}{est:>14.6g}{se:>12}{p:>10}")
        lines.append(f"loglik={self.loglik:.4f}  AIC={self.aic:.3f}  BIC={self.bic:.3f}")
        if self.vcov_error:
            lines.append(f"warning: {self.vcov_error}")
        return "\n".join(lines)


def _check_y(y, n):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size != n:
        raise StructuralError(f"response must be a vector of length {n}")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise DomainError("responses must be finite and strictly positive")
    return y


def _decode(theta, spec: RegressionSpec):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (spec.q,):
        raise StructuralError(f"theta must have length {spec.q}, got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        return None
    p = spec.p
    gamma, lam = theta[:p], theta[p]
    if not lam > 0:
        return None
    kernel = spec.kernel
    if spec.estimate_shape:
        shape = theta[p + 1]
        if not (SHAPE_MIN <= shape <= SHAPE_MAX):
            return None
        kernel = Kernel(kernel.family, shape)
    eta = spec.X @ gamma
    if not spec.link.feasible(eta):
        return None
    with np.errstate(over="ignore"):
        beta = spec.link.inverse(eta)
    if spec.model == "rbsq":
        beta = beta / rho(lam, spec.tau)
    if not (np.all(np.isfinite(beta)) and np.all(beta > 0)):
        return None
    return beta, lam, kernel


def loglik_terms(theta, y, spec: RegressionSpec):
    """Per-case (specific, common) log-density terms, or None when theta is infeasible."""
    dec = _decode(theta, spec)
    if dec is None:
        return None
    beta, lam, kernel = dec
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return iron_logpdf_terms(y, beta, lam, spec.alpha, kernel)


def case_loglik(theta, y, spec: RegressionSpec) -> np.ndarray:
    """Per-case log-likelihood contributions; all ``-inf`` if theta is infeasible."""
    terms = loglik_terms(theta, y, spec)
    if terms is None:
        return np.full(spec.n, -np.inf)
    out = terms[0] + terms[1]
    return np.where(np.isnan(out), -np.inf, out)


def loglik(theta, y, spec: RegressionSpec) -> float:
    """Total log-likelihood at natural-scale ``theta = (gamma, lam[, shape])``.

    Returns ``-inf`` (not an error) for infeasible proposals.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (spec.n,):
        raise StructuralError(f"response must be a vector of length {spec.n}")
    terms = loglik_terms(theta, y, spec)
    if terms is None:
        return -math.inf
    total = float(np.sum(terms[0]) + np.sum(terms[1]))
    return total if math.isfinite(total) else -math.inf


def aic_bic(ll: float, q: int, n: int):
    return -2.0 * ll + 2.0 * q, -2.0 * ll + q * math.log(n)


def information_criteria(fit: FitResult):
    """``(aic, bic)`` recomputed from the fit's log-likelihood, parameter count and n."""
    return aic_bic(fit.loglik, fit.q, fit.n)


def _to_natural(u, spec):
    theta = np.array(u, dtype=float)
    with np.errstate(over="ignore"):
        theta[spec.p:] = np.exp(theta[spec.p:])
    return theta


def _to_unconstrained(theta, spec):
    u = np.array(theta, dtype=float)
    u[spec.p:] = np.log(u[spec.p:])
    return u


def _start_gamma(y, spec: RegressionSpec, link: LinkFunction):
    X = spec.X
    yy = np.maximum(y, 0.5 * y.min()) if link.family is LinkFamily.LOG else y
    target = link.apply(yy)
    gamma, *_ = np.linalg.lstsq(X, target, rcond=None)
    j = spec.intercept_index
    if j is not None:
        gamma[j] += np.quantile(target - X @ gamma, spec.tau)
    if link.feasible(X @ gamma):
        return gamma
    if j is None:
        raise StructuralError("could not find a feasible starting point; add an intercept")
    const = np.zeros_like(gamma)
    const[j] = np.quantile(target, spec.tau) / X[0, j]
    for w in (0.5, 0.75, 0.9, 1.0):
        g = (1.0 - w) * gamma + w * const
        if link.feasible(X @ g):
            return g
    raise StructuralError("could not find a feasible starting point")


def start_values(y, spec: RegressionSpec, options: FitOptions) -> np.ndarray:
    """Natural-scale starting vector: OLS on the link scale, lam = 1, default kernel shape."""
    if options.init_theta is not None:
        theta = np.asarray(options.init_theta, dtype=float)
        if theta.shape != (spec.q,):
            raise StructuralError("init_theta has the wrong length")
        return theta.copy()
    if options.init_gamma is not None:
        gamma = np.asarray(options.init_gamma, dtype=float)
    else:
        gamma = _start_gamma(y, spec, spec.link)
    lam = 1.0 if options.init_lambda is None else float(options.init_lambda)
    parts = [gamma, [lam]]
    if spec.estimate_shape:
        shape = spec.kernel.shape if options.init_shape is None else float(options.init_shape)
        parts.append([shape])
    return np.concatenate(parts)


def fit(y, spec: RegressionSpec, options: Optional[FitOptions] = None) -> FitResult:
    """Maximize the log-likelihood over ``(gamma, log lam, log shape)``.

    Standard errors come from the inverse of the negative numerical Hessian,
    mapped back to ``(gamma, lam, shape)`` by the delta method; for EP
    kernels with exponent <= 1 (cusp at the origin), and whenever the optimizer
    stops at a kinked optimum, the outer product of the per-case scores
    replaces the Hessian.  A singular
    Hessian leaves ``vcov``/``se`` as None with ``vcov_error`` set; hitting
    the iteration cap yields ``converged=False`` rather than an exception.
    """
    options = options or FitOptions()
    if options.fix_shape and spec.estimate_shape:
        spec = replace(spec, estimate_shape=False)
    y = _check_y(y, spec.n)
    theta0 = start_values(y, spec, options)
    if not math.isfinite(loglik(theta0, y, spec)):
        raise StructuralError("log-likelihood is not finite at the starting values")

    def objective(u):
        return -loglik(_to_natural(u, spec), y, spec)

    res = optimize.minimize(
        objective,
        _to_unconstrained(theta0, spec),
        max_iter=options.max_iter,
        grad_tol=options.grad_tol,
        step_tol=options.step_tol,
    )
    theta = _to_natural(res.x, spec)
    ll = -res.fun
    if _kinked(spec, theta) or res.kinked:
        vcov_method = "opg"
        scores = numdiff.gradient(lambda u: case_loglik(_to_natural(u, spec), y, spec), res.x)
        vcov, se, err = _vcov(scores.T @ scores, theta, spec)
    else:
        vcov_method = "hessian"
        vcov, se, err = _vcov(res.hess, theta, spec)
    aic, bic = aic_bic(ll, spec.q, spec.n)
    p = spec.p
    shape_hat = float(theta[p + 1]) if spec.estimate_shape else None
    kernel = spec.kernel.with_shape(shape_hat) if spec.estimate_shape else spec.kernel
    return FitResult(
        gamma_hat=theta[:p].copy(),
        lambda_hat=float(theta[p]),
        shape_hat=shape_hat,
        loglik=ll,
        aic=aic,
        bic=bic,
        vcov=vcov,
        se=se,
        converged=res.converged,
        iterations=res.iterations,
        tau=spec.tau,
        kernel=kernel,
        link=spec.link,
        n=spec.n,
        model=spec.model,
        estimate_shape=spec.estimate_shape,
        param_names=spec.param_names(),
        vcov_error=err,
        vcov_method=vcov_method,
        message=res.message,
        grad_max=float(np.max(np.abs(res.grad))),
    )


def _kinked(spec, theta) -> bool:
    """EP kernels with exponent <= 1 have a cusp at the origin; their Hessian is unusable."""
    if spec.kernel.family is not Family.EXP_POWER:
        return False
    shape = theta[spec.p + 1] if spec.estimate_shape else spec.kernel.shape
    return shape <= 1.0


def _vcov(hess_u, theta, spec):
    """Delta-method covariance on the natural scale from the unconstrained Hessian."""
    if hess_u is None or not np.all(np.isfinite(hess_u)):
        return None, None, "Hessian unavailable"
    w, V = np.linalg.eigh(hess_u)
    if w.min() <= 1e-12 * max(1.0, abs(w.max())):
        return None, None, "Hessian is numerically singular or not negative definite"
    cov_u = (V / w) @ V.T
    J = np.ones(spec.q)
    J[spec.p:] = theta[spec.p:]
    cov = cov_u * np.outer(J, J)
    cov = 0.5 * (cov + cov.T)
    return cov, np.sqrt(np.diag(cov)), None


def fitted_distribution(fit: FitResult, X) -> IronParams:
    """Per-case IRON parameters implied by a fit at the rows of ``X`` (any number of rows)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != fit.p:
        raise StructuralError(f"X must have {fit.p} columns")
    eta = X @ fit.gamma_hat
    if not fit.link.feasible(eta):
        raise StateError("fitted parameters are infeasible for this design")
    beta = fit.link.inverse(eta)
    if fit.model == "rbsq":
        beta = beta / rho(fit.lambda_hat, fit.tau)
    return IronParams(beta, fit.lambda_hat, fit.alpha, fit.kernel)


def predict_quantile(fit: FitResult, x_new):
    """Predicted ``tau`` quantile for covariate profile ``x_new`` and its delta-method s.e."""
    if not fit.converged:
        raise StateError("prediction requires a converged fit")
    x = np.asarray(x_new, dtype=float)
    if x.shape != (fit.p,):
        raise StructuralError(f"x_new must have length {fit.p}")
    eta = float(x @ fit.gamma_hat)
    est = float(fit.link.inverse(eta))
    if fit.vcov is None:
        return est, None
    Vg = fit.vcov[: fit.p, : fit.p]
    sd_eta = math.sqrt(max(float(x @ Vg @ x), 0.0))
    dbeta = abs(float(fit.link.inverse_derivative(eta)))
    return est, dbeta * sd_eta
