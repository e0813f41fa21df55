"""Standardized symmetric (elliptical) densities on the real line.

Each kernel defines a density ``f(y) = k(y**2)`` symmetric about the origin,
so that ``F(0) = 1/2`` and ``F^{-1}(1/2) = 0``.  All functions accept scalars
or arrays and return the same shape (floats for scalar input).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError

__all__ = [
    "Family",
    "Kernel",
    "parse_kernel",
    "kernel_density",
    "kernel_logpdf",
    "kernel_cdf",
    "kernel_logcdf",
    "kernel_quantile",
]

SHAPE_MIN = 0.1
LOG_2PI = math.log(2.0 * math.pi)
LOG_PI = math.log(math.pi)
LOG_HALF = math.log(0.5)


class Family(str, enum.Enum):
    NORMAL = "normal"
    STUDENT_T = "t"
    LOGISTIC = "logistic"
    EXP_POWER = "ep"
    CAUCHY = "cauchy"


_SHAPED = (Family.STUDENT_T, Family.EXP_POWER)
DEFAULT_SHAPE = {Family.STUDENT_T: 4.0, Family.EXP_POWER: 2.0}
_ALIASES = {
    "n": Family.NORMAL,
    "normal": Family.NORMAL,
    "t": Family.STUDENT_T,
    "student": Family.STUDENT_T,
    "studentt": Family.STUDENT_T,
    "l": Family.LOGISTIC,
    "logistic": Family.LOGISTIC,
    "ep": Family.EXP_POWER,
    "pe": Family.EXP_POWER,
    "exppower": Family.EXP_POWER,
    "c": Family.CAUCHY,
    "cauchy": Family.CAUCHY,
}


@dataclass(frozen=True)
class Kernel:
    """An elliptical kernel: a family plus its shape (t degrees of freedom, EP exponent).

    ``shape`` must be given for the Student-t and exponential-power families
    (use :func:`parse_kernel` to get the defaults) and must be absent otherwise.
    Shapes above ~1e6 are accepted but behave numerically like the Normal
    (t) or a uniform-like law (EP).
    """

    family: Family
    shape: Optional[float] = None

    def __post_init__(self):
        fam = Family(self.family)
        object.__setattr__(self, "family", fam)
        if fam in _SHAPED:
            if self.shape is None:
                raise ParameterError(f"kernel {fam.value!r} requires a shape")
            shape = float(self.shape)
            if not math.isfinite(shape) or shape < SHAPE_MIN:
                raise ParameterError(
                    f"kernel shape must be finite and >= {SHAPE_MIN}, got {self.shape!r}"
                )
            object.__setattr__(self, "shape", shape)
        elif self.shape is not None:
            raise ParameterError(f"kernel {fam.value!r} takes no shape")

    @property
    def has_shape(self) -> bool:
        return self.family in _SHAPED

    def with_shape(self, shape: float) -> "Kernel":
        return Kernel(self.family, shape)

    @property
    def name(self) -> str:
        if self.shape is None:
            return self.family.value
        return f"{self.family.value}:{self.shape:g}"

    def __str__(self) -> str:
        return self.name


def parse_kernel(text: str) -> Kernel:
    """Parse ``"normal"``, ``"t:4.0"``, ``"ep:0.75"`` ... (case-insensitive).

    Shaped families without an explicit shape get 4.0 (t) or 2.0 (EP).
    """
    if isinstance(text, Kernel):
        return text
    name, _, shape = str(text).strip().lower().partition(":")
    key = name.replace("-", "").replace("_", "").replace(" ", "")
    if key not in _ALIASES:
        raise ParameterError(f"unknown kernel {text!r}")
    fam = _ALIASES[key]
    if fam in _SHAPED:
        if shape:
            try:
                value = float(shape)
            except ValueError:
                raise ParameterError(f"bad kernel shape in {text!r}") from None
        else:
            value = DEFAULT_SHAPE[fam]
        return Kernel(fam, value)
    if shape:
        raise ParameterError(f"kernel {fam.value!r} takes no shape, got {text!r}")
    return Kernel(fam)


def _out(x, scalar):
    return float(x) if scalar else x


def _asarray(x):
    scalar = np.ndim(x) == 0
    return np.asarray(x, dtype=float), scalar


def _log1p_square(y, s):
    """``log(1 + y**2 / s)`` without overflow for huge ``|y|``."""
    ay = np.abs(y)
    big = ay > 1e100
    with np.errstate(divide="ignore"):
        return np.where(big, 2.0 * np.log(np.where(big, ay, 1.0)) - math.log(s), np.log1p(np.where(big, 0.0, ay) ** 2 / s))


def kernel_logpdf(kernel: Kernel, y):
    """Log of the standardized density ``log k(y**2)``."""
    y, scalar = _asarray(y)
    fam, s = kernel.family, kernel.shape
    if fam is Family.NORMAL:
        out = -0.5 * y * y - 0.5 * LOG_2PI
    elif fam is Family.STUDENT_T:
        out = (
            special.gammaln(0.5 * (s + 1.0))
            - special.gammaln(0.5 * s)
            - 0.5 * (math.log(s) + LOG_PI)
            - 0.5 * (s + 1.0) * _log1p_square(y, s)
        )
    elif fam is Family.LOGISTIC:
        ay = np.abs(y)
        out = -ay - 2.0 * np.log1p(np.exp(-ay))
    elif fam is Family.EXP_POWER:
        out = math.log(s) - math.log(2.0) - special.gammaln(1.0 / s) - np.abs(y) ** s
    else:
        out = -LOG_PI - _log1p_square(y, 1.0)
    return _out(out, scalar)


def kernel_density(kernel: Kernel, y):
    """Standardized density ``f(y) = k(y**2)``."""
    y, scalar = _asarray(y)
    return _out(np.exp(kernel_logpdf(kernel, y)), scalar)


def _t_left_tail(x, nu):
    """P(T <= x) for x <= 0 via the regularized incomplete beta function."""
    # w = nu / (nu + x^2) through r2 = nu / x^2, so huge |x| gives w = 0 rather than nan
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        r2 = np.where(x == 0.0, np.inf, nu / np.where(x == 0.0, 1.0, x) ** 2)
        w = np.where(np.isinf(r2), 1.0, r2 / (1.0 + r2))
        one_minus_w = 1.0 / (1.0 + r2)
    with np.errstate(invalid="ignore"):
        small = 0.5 * special.betainc(0.5 * nu, 0.5, w)
        near_half = 0.5 - 0.5 * special.betainc(0.5, 0.5 * nu, one_minus_w)
    return np.where(w < 0.5, small, near_half)


def _ep_left_tail(x, kappa):
    return 0.5 * special.gammaincc(1.0 / kappa, np.abs(x) ** kappa)


def _left_tail(kernel: Kernel, x):
    """F(x) for x <= 0, computed without cancellation."""
    fam, s = kernel.family, kernel.shape
    if fam is Family.NORMAL:
        return special.ndtr(x)
    if fam is Family.STUDENT_T:
        return _t_left_tail(x, s)
    if fam is Family.LOGISTIC:
        return special.expit(x)
    if fam is Family.EXP_POWER:
        return _ep_left_tail(x, s)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(x == 0.0, 0.5, np.arctan(-1.0 / np.where(x == 0.0, -1.0, x)) / math.pi)


def kernel_cdf(kernel: Kernel, x):
    """CDF of the standardized kernel; ``F(-x) = 1 - F(x)`` and ``F(0) = 1/2``."""
    x, scalar = _asarray(x)
    neg = np.minimum(x, -x)
    tail = _left_tail(kernel, neg)
    out = np.where(x <= 0.0, tail, 1.0 - tail)
    out = np.where(x == 0.0, 0.5, out)
    return _out(out, scalar)


def _gamma_tail_series(a, z, terms=60):
    """Asymptotic series ``sum_k (a-1)(a-2)...(a-k) / z^k``, cut at its smallest term."""
    z = np.asarray(z, dtype=float)
    total = np.ones_like(z)
    term = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, terms):
        nxt = term * (a - k) / z
        active &= np.abs(nxt) < np.abs(term)
        if not active.any():
            break
        term = np.where(active, nxt, term)
        total = total + np.where(active, nxt, 0.0)
    return total


def _log_left_tail(kernel: Kernel, x):
    """log F(x) for x <= 0, robust far into the left tail."""
    fam, s = kernel.family, kernel.shape
    if fam is Family.NORMAL:
        return special.log_ndtr(x)
    if fam is Family.LOGISTIC:
        return -np.logaddexp(0.0, -x)
    if fam is Family.CAUCHY:
        with np.errstate(divide="ignore"):
            safe = np.where(x == 0.0, -1.0, x)
            val = np.log(np.arctan(-1.0 / safe)) - LOG_PI
        return np.where(x == 0.0, LOG_HALF, val)
    tail = _left_tail(kernel, x)
    with np.errstate(divide="ignore"):
        out = np.log(tail)
    bad = tail < 1e-290
    if np.any(bad):
        xb = x[bad] if np.ndim(x) else x
        if fam is Family.STUDENT_T:
            # F(x) ~ f(x) |x| / nu as x -> -inf
            approx = kernel_logpdf(kernel, xb) + np.log(np.abs(xb)) - math.log(s)
        else:
            # log Q(a, z) ~ (a-1) log z - z - lgamma(a) + log(sum_k (a-1)...(a-k) / z^k)
            a = 1.0 / s
            z = np.abs(xb) ** s
            approx = LOG_HALF + (a - 1.0) * np.log(z) - z - special.gammaln(a) + np.log(_gamma_tail_series(a, z))
        if np.ndim(x):
            out = out.copy()
            out[bad] = approx
        else:
            out = approx
    return out


def kernel_logcdf(kernel: Kernel, x):
    """``log F(x)``, accurate for ``x`` far in the left tail."""
    x, scalar = _asarray(x)
    neg = np.minimum(x, -x)
    left = _log_left_tail(kernel, neg)
    # for x > 0, log(1 - F(-x)) with F(-x) <= 1/2
    right = np.log1p(-np.exp(left))
    out = np.where(x <= 0.0, left, right)
    return _out(out, scalar)


def _polish_log(kernel: Kernel, log_lo, x, steps=6):
    """Newton refinement of log F(x) = log_lo for x < 0 (relative accuracy deep in the tail)."""
    live = np.isfinite(x)  # a start of -inf means the quantile is below -DBL_MAX
    safe = np.where(live, x, -1.0)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for _ in range(steps):
            lf = _log_left_tail(kernel, safe)
            hazard = np.exp(kernel_logpdf(kernel, safe) - lf)  # d log F / dx
            new = safe - (lf - log_lo) / hazard
            safe = np.where(np.isfinite(new) & (new < 0.0), new, safe)
    return np.where(live, safe, x)


def _t_tail_start(nu, log_lo):
    """Left quantile from F(x) ~ c nu^((nu-1)/2) |x|^-nu, c the t density constant."""
    log_c = special.gammaln(0.5 * (nu + 1)) - special.gammaln(0.5 * nu) - 0.5 * (math.log(nu) + LOG_PI)
    with np.errstate(over="ignore"):
        return -np.exp((log_c + 0.5 * (nu - 1) * math.log(nu) - log_lo) / nu)


def _left_quantile(kernel: Kernel, lo):
    """F^{-1}(lo) for 0 < lo < 1/2."""
    fam, s = kernel.family, kernel.shape
    if fam is Family.NORMAL:
        return special.ndtri(lo)
    if fam is Family.LOGISTIC:
        return special.logit(lo)
    if fam is Family.CAUCHY:
        return -1.0 / np.tan(math.pi * lo)
    log_lo = np.log(lo)
    if fam is Family.STUDENT_T:
        start = special.stdtrit(s, lo)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            off = np.abs(_log_left_tail(kernel, np.minimum(start, -1e-300)) - log_lo)
        bad = ~np.isfinite(start) | ~(off <= 1e-6 * np.abs(log_lo))
        start = np.where(bad, _t_tail_start(s, log_lo), start)
    else:
        # |x|^kappa ~ Gamma(1/kappa): invert the upper tail where it is small
        tail = 2.0 * lo
        with np.errstate(invalid="ignore"):
            z = np.where(tail < 0.5, special.gammainccinv(1.0 / s, tail),
                         special.gammaincinv(1.0 / s, 1.0 - tail))
        start = -(z ** (1.0 / s))
    return _polish_log(kernel, log_lo, start)


def kernel_quantile(kernel: Kernel, u):
    """Inverse CDF ``F^{-1}(u)`` for ``0 < u < 1``; exactly 0 at ``u = 1/2``."""
    u, scalar = _asarray(u)
    if np.any(~(u > 0.0) | ~(u < 1.0)):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    lo = np.minimum(u, 1.0 - u)
    centre = lo == 0.5
    x = _left_quantile(kernel, np.where(centre, 0.25, lo))
    out = np.where(u < 0.5, x, -x)
    out = np.where(centre, 0.0, out)
    return _out(out, scalar)
