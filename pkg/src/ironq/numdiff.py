"""Finite-difference derivatives used by the fitter and the diagnostics.

Functions may return a scalar or a vector (per-case contributions); the
derivative gains a trailing parameter axis accordingly.
"""
from __future__ import annotations

import numpy as np

EPS = np.finfo(float).eps
GRAD_REL_STEP = EPS ** (1.0 / 3.0)
HESS_REL_STEP = 1e-4


def _steps(x, rel):
    return rel * (1.0 + np.abs(x))


def gradient(f, x, rel_step=GRAD_REL_STEP):
    """Central-difference gradient (or Jacobian, for vector-valued ``f``).

    Where one side of the stencil is non-finite (an infeasible neighbour) the
    one-sided difference from the other side is used instead.
    """
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    cols = []
    f0 = None
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        fp, fm = np.asarray(f(x + e), dtype=float), np.asarray(f(x - e), dtype=float)
        with np.errstate(invalid="ignore", over="ignore"):
            d = (fp - fm) / (2.0 * h[j])
            bad_p, bad_m = ~np.isfinite(fp), ~np.isfinite(fm)
            if np.any(bad_p ^ bad_m):
                if f0 is None:
                    f0 = np.asarray(f(x), dtype=float)
                d = np.where(bad_p & ~bad_m, (f0 - fm) / h[j], d)
                d = np.where(bad_m & ~bad_p, (fp - f0) / h[j], d)
        cols.append(d)
    return np.stack(cols, axis=-1)


def richardson_gradient(f, x, rel_step=1e-3):
    """Gradient from two central differences (h and h/2) combined by Richardson extrapolation."""
    g1 = gradient(f, x, rel_step)
    g2 = gradient(f, x, rel_step / 2.0)
    return (4.0 * g2 - g1) / 3.0


def hessian(f, x, rel_step=HESS_REL_STEP, grad_step=GRAD_REL_STEP):
    """Hessian as central differences of the central-difference gradient, symmetrized."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    rows = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h[j]
        gp, gm = gradient(f, x + e, grad_step), gradient(f, x - e, grad_step)
        with np.errstate(invalid="ignore", over="ignore"):
            rows.append((gp - gm) / (2.0 * h[j]))
    H = np.stack(rows, axis=-2)
    return 0.5 * (H + np.swapaxes(H, -1, -2))


def case_hessians(f, x, rel_step=HESS_REL_STEP):
    """Per-case Hessians of a vector-valued ``f`` (n cases) by second differences.

    Returns an array of shape (n, q, q).
    """
    x = np.asarray(x, dtype=float)
    q = x.size
    h = _steps(x, rel_step)
    f0 = np.asarray(f(x))
    H = np.empty(f0.shape + (q, q))
    for j in range(q):
        ej = np.zeros(q)
        ej[j] = h[j]
        H[..., j, j] = (np.asarray(f(x + ej)) - 2.0 * f0 + np.asarray(f(x - ej))) / h[j] ** 2
        for k in range(j + 1, q):
            ek = np.zeros(q)
            ek[k] = h[k]
            v = (
                np.asarray(f(x + ej + ek))
                - np.asarray(f(x + ej - ek))
                - np.asarray(f(x - ej + ek))
                + np.asarray(f(x - ej - ek))
            ) / (4.0 * h[j] * h[k])
            H[..., j, k] = v
            H[..., k, j] = v
    return H
