"""Quasi-Newton minimizer with Armijo backtracking and a Newton polishing stage.

Objectives may return ``+inf`` for infeasible points; the line search simply
backtracks past them.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import minimize as _scipy_minimize

from . import numdiff

ARMIJO_C = 1e-4
MAX_BACKTRACKS = 60
FALLBACK_NM_STEPS = 50
PROBE_FTOL = 1e-6


@dataclass
class OptimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    hess: Optional[np.ndarray]
    converged: bool
    iterations: int
    message: str
    n_fallbacks: int = 0
    history: list = field(default_factory=list)
    kinked: bool = False  # accepted by the Nelder-Mead probe rather than the smooth tests


def _grad_fn(fun, grad):
    if grad is not None:
        return grad
    return lambda x: numdiff.gradient(fun, x)


def _rel_step(dx, x):
    return float(np.max(np.abs(dx) / (1.0 + np.abs(x))))


def _line_search(fun, x, f, g, p):
    with np.errstate(over="ignore", invalid="ignore"):
        slope = float(g @ p)
    if not slope < 0:
        return None
    t = 1.0
    for _ in range(MAX_BACKTRACKS):
        x_new = x + t * p
        f_new = fun(x_new)
        if np.isfinite(f_new) and f_new <= f + ARMIJO_C * t * slope:
            return t, x_new, f_new
        t *= 0.5
    return None


def _nelder_mead(fun, x, steps):
    res = _scipy_minimize(
        fun, x, method="Nelder-Mead",
        options={"maxiter": steps, "xatol": 1e-10, "fatol": 1e-12},
    )
    return np.asarray(res.x, dtype=float), float(res.fun)


def bfgs(
    fun: Callable,
    x0,
    grad: Optional[Callable] = None,
    max_iter: int = 500,
    grad_tol: float = 1e-6,
    step_tol: float = 1e-8,
) -> OptimizeResult:
    """Minimize ``fun`` with inverse-Hessian BFGS updates.

    Stops when the gradient max-norm drops below ``grad_tol`` or the relative
    step falls below ``step_tol``.  On line-search failure runs a short
    Nelder-Mead burst and restarts the inverse Hessian.
    """
    gfun = _grad_fn(fun, grad)
    x = np.asarray(x0, dtype=float).copy()
    f = fun(x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    g = gfun(x)
    n = x.size
    H = np.eye(n)
    scaled = False
    fallbacks = 0
    message = "iteration limit reached"
    it = 0
    small_steps = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) < grad_tol:
            message = "gradient tolerance reached"
            it -= 1
            break
        if not np.all(np.isfinite(g)):
            message = "non-finite gradient"
            break
        with np.errstate(over="ignore", invalid="ignore"):
            p = -H @ g
        ls = _line_search(fun, x, f, g, p) if np.all(np.isfinite(p)) else None
        if ls is None:
            # steepest descent before giving up on derivative information
            ls = _line_search(fun, x, f, g, -g / max(1.0, np.max(np.abs(g))))
        if ls is None:
            fallbacks += 1
            x_nm, f_nm = _nelder_mead(fun, x, FALLBACK_NM_STEPS)
            if not f_nm < f:
                message = "line search failed"
                break
            x, f = x_nm, f_nm
            g = gfun(x)
            H = np.eye(n)
            scaled = False
            continue
        _, x_new, f_new = ls
        g_new = gfun(x_new)
        s = x_new - x
        y = g_new - g
        rel = _rel_step(s, x)
        x, f, g = x_new, f_new, g_new
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                H = np.eye(n) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            Hy = H @ y
            H = H + ((sy + y @ Hy) * rho * rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        if rel < step_tol:
            small_steps += 1
            if small_steps >= 2:
                message = "relative step tolerance reached"
                break
        else:
            small_steps = 0
    converged = bool(np.max(np.abs(g)) < grad_tol)
    return OptimizeResult(x, float(f), g, None, converged, it, message, fallbacks)


def newton_polish(fun, x, f, max_steps=10, step_tol=1e-8, hess=None):
    """Refine a near-optimum with damped Newton steps on the numerical Hessian.

    Returns ``(x, f, hess, last_rel_step)``; the Hessian is evaluated at the
    returned point.
    """
    x = np.asarray(x, dtype=float)
    H = numdiff.hessian(fun, x) if hess is None else hess
    last = np.inf
    for _ in range(max_steps):
        g = numdiff.gradient(fun, x)
        try:
            w = np.linalg.eigvalsh(H)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(w)) or w.min() <= 0:
            break
        p = -np.linalg.solve(H, g)
        t = 1.0
        accepted = False
        for _ in range(30):
            x_new = x + t * p
            f_new = fun(x_new)
            if np.isfinite(f_new) and f_new <= f + 1e-12 * (1.0 + abs(f)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        last = _rel_step(x_new - x, x)
        x, f = x_new, f_new
        H = numdiff.hessian(fun, x)
        if last < step_tol:
            break
    return x, float(f), H, last


def _probe(fun, x, f, steps):
    """Nelder-Mead restart from ``x``; True if it cannot improve ``f`` materially."""
    x_nm, f_nm = _nelder_mead(fun, x, steps)
    return f_nm >= f - PROBE_FTOL * (1.0 + abs(f)), x_nm, f_nm


def minimize(fun, x0, max_iter=500, grad_tol=1e-6, step_tol=1e-8, polish=True,
             max_restarts=10) -> OptimizeResult:
    """BFGS followed by Newton polishing; fills ``hess`` at the solution.

    ``converged`` is true when the final gradient max-norm is below
    ``grad_tol``, or when the last Newton step moved the parameters by less
    than ``step_tol`` (relative) at a positive definite Hessian; the latter
    covers large samples where finite-difference noise floors the gradient.
    When neither holds (a kinked optimum, e.g. an exponential-power kernel
    with exponent <= 1), a Nelder-Mead restart that fails to improve the
    objective also counts as convergence; if it does improve, BFGS restarts
    from the better point.
    """
    x = np.asarray(x0, dtype=float)
    total_iter = 0
    fallbacks = 0
    for attempt in range(max_restarts + 1):
        res = bfgs(fun, x, max_iter=max_iter - total_iter, grad_tol=grad_tol, step_tol=step_tol)
        total_iter += res.iterations
        fallbacks += res.n_fallbacks
        if not polish:
            return res
        x, f, H, last = newton_polish(fun, res.x, res.fun, step_tol=step_tol)
        g = numdiff.gradient(fun, x)
        try:
            pd = bool(np.all(np.linalg.eigvalsh(H) > 0))
        except np.linalg.LinAlgError:
            pd = False
        smooth_ok = np.max(np.abs(g)) < grad_tol or (pd and last < step_tol)
        if smooth_ok or total_iter >= max_iter:
            break
        still, x_nm, f_nm = _probe(fun, x, f, 100 * x.size)
        fallbacks += 1
        if still:
            return OptimizeResult(x, f, g, H, bool(np.all(np.isfinite(x))), total_iter,
                                  "non-smooth optimum (Nelder-Mead cannot improve)", fallbacks,
                                  kinked=True)
        x = x_nm
    converged = bool(smooth_ok and total_iter < max_iter and np.all(np.isfinite(x)))
    message = res.message if converged else "not converged"
    return OptimizeResult(x, f, g, H, converged, total_iter, message, fallbacks)
