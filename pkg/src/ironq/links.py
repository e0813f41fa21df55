"""Link functions connecting the quantile parameter to the linear predictor."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError

__all__ = ["LinkFamily", "LinkFunction", "parse_link", "link_apply", "link_inverse", "link_derivative"]


class LinkFamily(str, enum.Enum):
    IDENTITY = "identity"
    LOG = "log"
    SQRT = "sqrt"


@dataclass(frozen=True)
class LinkFunction:
    family: LinkFamily = LinkFamily.IDENTITY

    def __post_init__(self):
        object.__setattr__(self, "family", LinkFamily(self.family))

    @property
    def name(self) -> str:
        return self.family.value

    def __str__(self) -> str:
        return self.name

    def apply(self, beta):
        """eta = link(beta)."""
        beta = np.asarray(beta, dtype=float)
        fam = self.family
        if fam is LinkFamily.LOG:
            if np.any(~(beta > 0)):
                raise DomainError("log link requires beta > 0")
            return np.log(beta)
        if fam is LinkFamily.SQRT:
            if np.any(~(beta >= 0)):
                raise DomainError("sqrt link requires beta >= 0")
            return np.sqrt(beta)
        return beta.copy()

    def inverse(self, eta):
        """beta = link^{-1}(eta)."""
        eta = np.asarray(eta, dtype=float)
        fam = self.family
        if fam is LinkFamily.LOG:
            return np.exp(eta)
        if fam is LinkFamily.SQRT:
            if np.any(~(eta >= 0)):
                raise DomainError("inverse sqrt link requires eta >= 0")
            return eta * eta
        return eta.copy()

    def derivative(self, beta):
        """d eta / d beta."""
        beta = np.asarray(beta, dtype=float)
        fam = self.family
        if fam is LinkFamily.LOG:
            if np.any(~(beta > 0)):
                raise DomainError("log link requires beta > 0")
            return 1.0 / beta
        if fam is LinkFamily.SQRT:
            if np.any(~(beta > 0)):
                raise DomainError("sqrt link derivative requires beta > 0")
            return 0.5 / np.sqrt(beta)
        return np.ones_like(beta)

    def inverse_derivative(self, eta):
        """d beta / d eta."""
        eta = np.asarray(eta, dtype=float)
        fam = self.family
        if fam is LinkFamily.LOG:
            return np.exp(eta)
        if fam is LinkFamily.SQRT:
            return 2.0 * eta
        return np.ones_like(eta)

    def feasible(self, eta) -> bool:
        """Whether eta maps to strictly positive quantiles."""
        if self.family is LinkFamily.LOG:
            return bool(np.all(np.isfinite(eta)))
        return bool(np.all(eta > 0))


def parse_link(text) -> LinkFunction:
    if isinstance(text, LinkFunction):
        return text
    try:
        return LinkFunction(LinkFamily(str(text).strip().lower()))
    except ValueError:
        raise ParameterError(f"unknown link {text!r}") from None


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def link_apply(link, beta):
    return _out(parse_link(link).apply(beta))


def link_inverse(link, eta):
    return _out(parse_link(link).inverse(eta))


def link_derivative(link, beta):
    return _out(parse_link(link).derivative(beta))
