"""The limiting spike (bandit) distribution of the policy-driven statistic.

A spike distribution ``B(omega, sigma0)`` has density

    f(y) = phi((|y| - omega) / sigma0) / sigma0
           - (omega / sigma0^2) * exp(2*omega*|y| / sigma0^2) * Phi(-(|y| + omega) / sigma0)

which degenerates to the standard normal at ``omega = 0, sigma0 = 1`` and is
bimodal for ``omega > 0``. The exp-times-Phi product is evaluated in log space:
for large ``omega * |y|`` the exponential overflows on its own while the product
stays bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr, ndtri

from .errors import ValidationError
from .validation import check_finite_scalar, check_positive

__all__ = [
    "BanditParams",
    "bandit_density",
    "bandit_cdf",
    "bandit_tail_prob",
    "bandit_p_value",
    "normal_cdf",
    "normal_quantile",
]

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class BanditParams:
    """Location/scale pair of a spike distribution.

    ``omega`` shifts the two peaks away from zero (negative values sharpen the
    central spike); ``sigma0`` scales peak width and must be positive. When
    derived from a mean/volatility pair via ``from_mean_sigma`` the scale is
    ``sqrt(1 + mu^2/sigma^2) >= 1`` automatically.
    """

    omega: float
    sigma0: float

    def __post_init__(self):
        check_finite_scalar("omega", self.omega)
        check_positive("sigma0", self.sigma0)

    @classmethod
    def from_mean_sigma(cls, mu: float, sigma: float, lam: float, n: int) -> "BanditParams":
        """Limit parameters for sample size n, weight lam, rewards ~ (mu, sigma^2)."""
        mu = check_finite_scalar("mu", mu)
        sigma = check_positive("sigma", sigma)
        if not 0.0 <= lam < 1.0:
            raise ValidationError(f"lam must lie in [0, 1), got {lam!r}")
        if n < 1:
            raise ValidationError(f"n must be >= 1, got {n!r}")
        omega = lam / (1.0 - lam) * mu + math.sqrt(n) * mu / sigma
        sigma0 = math.sqrt(1.0 + (mu / sigma) ** 2)
        return cls(omega=omega, sigma0=sigma0)


def _as_checked_array(name: str, y) -> tuple[np.ndarray, bool]:
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite")
    return arr, arr.ndim == 0


def bandit_density(y, params: BanditParams):
    """Density of B(omega, sigma0); even in y and nonnegative.

    Accepts a scalar or an array of evaluation points.
    """
    arr, scalar = _as_checked_array("y", y)
    ay = np.abs(arr)
    omega, sigma0 = params.omega, params.sigma0
    var = sigma0 * sigma0
    gauss = np.exp(-((ay - omega) ** 2) / (2.0 * var)) / (_SQRT_2PI * sigma0)
    log_mag = 2.0 * omega * ay / var + log_ndtr(-(ay + omega) / sigma0)
    spike = (omega / var) * np.exp(log_mag)
    out = np.maximum(gauss - spike, 0.0)
    return float(out) if scalar else out


def bandit_tail_prob(z, params: BanditParams):
    """P(|eta| > z) for eta ~ B(omega, sigma0), z >= 0.

    Closed form: Phi((omega - z)/sigma0) + exp(2*omega*z/sigma0^2) * Phi(-(omega + z)/sigma0),
    with the second term computed in log space.
    """
    arr, scalar = _as_checked_array("z", z)
    if np.any(arr < 0):
        raise ValidationError("z must be >= 0")
    omega, sigma0 = params.omega, params.sigma0
    var = sigma0 * sigma0
    first = ndtr((omega - arr) / sigma0)
    second = np.exp(2.0 * omega * arr / var + log_ndtr(-(omega + arr) / sigma0))
    out = np.clip(first + second, 0.0, 1.0)
    return float(out) if scalar else out


def bandit_cdf(y, params: BanditParams):
    """CDF of B(omega, sigma0), from the tail formula and evenness of the density."""
    arr, scalar = _as_checked_array("y", y)
    half_tail = 0.5 * bandit_tail_prob(np.abs(arr), params)
    out = np.where(arr >= 0, 1.0 - half_tail, half_tail)
    return float(out) if scalar else out


def bandit_p_value(t, params: BanditParams) -> float:
    """Two-tailed p-value P(|eta| > |t|) under the exact spike law.

    With omega=0, sigma0=1 this coincides with the normal-based 2*Phi(-|t|).
    """
    arr, scalar = _as_checked_array("t", t)
    out = bandit_tail_prob(np.abs(arr), params)
    return float(out) if scalar else out


def normal_cdf(x):
    """Standard normal CDF; keeps strictly positive values out to |x| ~ 38."""
    arr, scalar = _as_checked_array("x", x)
    out = np.asarray(ndtr(arr))
    # erfc flushes to zero slightly too early; exp(log Phi) stays subnormal-positive
    dead = (out == 0.0) & (arr > -38.6)
    if np.any(dead):
        out = np.where(dead, np.exp(log_ndtr(arr)), out)
    return float(out) if scalar else out


def normal_quantile(p):
    """Standard normal quantile; p must lie strictly inside (0, 1)."""
    arr = np.asarray(p, dtype=float)
    scalar = arr.ndim == 0
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise ValidationError("p must lie strictly inside (0, 1)")
    out = ndtri(arr)
    return float(out) if scalar else out
