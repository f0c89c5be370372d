"""Nakagami distribution mathematics.

Density, log-density, analytic score, exact sampling, and the special
functions (gamma, digamma) every estimator in the toolkit depends on.
All functions are pure and vectorized over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError, InvalidArgumentError

__all__ = [
    "NakagamiParams",
    "pdf",
    "log_pdf",
    "analytic_score",
    "sample",
    "gamma_fn",
    "digamma",
]


@dataclass(frozen=True)
class NakagamiParams:
    """Shape m (dimensionless) and scale omega (amplitude^2) of a Nakagami law.

    omega is the second moment of the envelope amplitude: E[R^2] = omega.
    """

    m: float
    omega: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and np.isfinite(self.omega)):
            raise InvalidArgumentError("Nakagami parameters must be finite")
        if self.m <= 0 or self.omega <= 0:
            raise InvalidArgumentError(
                f"Nakagami parameters must be positive, got m={self.m}, omega={self.omega}"
            )


def _check_finite(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise InvalidArgumentError("amplitude input must be finite")
    return r


def gamma_fn(x):
    """Gamma function on the positive half-line."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("gamma_fn requires x > 0")
    return special.gamma(x)


def digamma(x):
    """Digamma function (derivative of log Gamma) on the positive half-line."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise DomainError("digamma requires x > 0")
    return special.digamma(x)


def pdf(r, p: NakagamiParams):
    """Nakagami density at amplitude r; zero for r < 0 (unit step).

    p(r) = 2 / Gamma(m) * (m/omega)^m * r^(2m-1) * exp(-m r^2 / omega), r >= 0.
    """
    r = _check_finite(r)
    m, omega = p.m, p.omega
    coeff = 2.0 / special.gamma(m) * (m / omega) ** m
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = coeff * np.power(r, 2.0 * m - 1.0) * np.exp(-m * r * r / omega)
    out = np.where(r < 0, 0.0, vals)
    # r = 0, m = 0.5 limit: r^(2m-1) = r^0 = 1
    if np.ndim(out) == 0:
        return float(out)
    return out


def log_pdf(r, p: NakagamiParams):
    """Log-density; defined for r > 0 only.

    Summed over i.i.d. samples this is the Nakagami log-likelihood.
    """
    r = _check_finite(r)
    if np.any(r <= 0):
        raise DomainError("log_pdf requires r > 0")
    m, omega = p.m, p.omega
    out = (
        np.log(2.0)
        - special.gammaln(m)
        + m * (np.log(m) - np.log(omega))
        + (2.0 * m - 1.0) * np.log(r)
        - m * r * r / omega
    )
    if np.ndim(out) == 0:
        return float(out)
    return out


def analytic_score(r, p: NakagamiParams):
    """d/dr log p(r) = (2m-1)/r - 2 m r / omega, for r > 0."""
    r = _check_finite(r)
    if np.any(r <= 0):
        raise DomainError("analytic_score requires r > 0")
    m, omega = p.m, p.omega
    out = (2.0 * m - 1.0) / r - 2.0 * m * r / omega
    if np.ndim(out) == 0:
        return float(out)
    return out


def sample(p: NakagamiParams, n: int, seed, size=None) -> np.ndarray:
    """Draw Nakagami amplitudes: R = sqrt(Y), Y ~ Gamma(shape=m, mean=omega).

    Exact (no rejection) and deterministic given the seed. `seed` may be an
    int or a numpy Generator. `size` overrides n with an arbitrary shape.
    """
    if size is None:
        if n < 1:
            raise InvalidArgumentError("n must be >= 1")
        size = n
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    y = rng.gamma(shape=p.m, scale=p.omega / p.m, size=size)
    return np.sqrt(y)
