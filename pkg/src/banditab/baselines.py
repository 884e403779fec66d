"""Comparator tests: difference-in-means, CUPED, and the DML z-test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .crossfit import Dataset
from .distributions import normal_cdf
from .errors import DegenerateVarianceError, ValidationError
from .policy import PseudoOutcomes

__all__ = ["BaselineResult", "dim_test", "cuped_test", "zdml_test"]

_P_FLOOR = 1e-300


@dataclass(frozen=True)
class BaselineResult:
    method: str
    estimate: float
    variance: float
    z: float
    p_one_sided: float
    p_two_sided: float

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "variance": self.variance,
            "z": self.z,
            "p_one_sided": self.p_one_sided,
            "p_two_sided": self.p_two_sided,
        }


def _result(method: str, estimate: float, variance: float) -> BaselineResult:
    if variance > 0:
        z = estimate / math.sqrt(variance)
    elif estimate == 0.0:
        z = 0.0
    else:
        z = math.inf if estimate > 0 else -math.inf
    if math.isinf(z):
        p_one = _P_FLOOR if z > 0 else 1.0
        p_two = _P_FLOOR
    else:
        p_one = max(normal_cdf(-z), _P_FLOOR)
        p_two = max(2.0 * normal_cdf(-abs(z)), _P_FLOOR)
    return BaselineResult(method=method, estimate=float(estimate),
                          variance=float(variance), z=float(z),
                          p_one_sided=float(p_one), p_two_sided=float(p_two))


def _dim_parts(y: np.ndarray, a: np.ndarray) -> tuple[float, float]:
    y1 = y[a == 1]
    y0 = y[a == 0]
    if y1.size < 2 or y0.size < 2:
        raise ValidationError("both arms need at least 2 subjects")
    estimate = float(y1.mean() - y0.mean())
    variance = float(y1.var(ddof=1) / y1.size + y0.var(ddof=1) / y0.size)
    return estimate, variance


def dim_test(data: Dataset) -> BaselineResult:
    """Difference in arm means with the usual two-sample variance."""
    estimate, variance = _dim_parts(data.Y, data.A)
    return _result("DIM", estimate, variance)


def cuped_test(data: Dataset, covariate_cols=None) -> BaselineResult:
    """Difference in means on linearly covariate-adjusted outcomes.

    The adjustment coefficient is the pooled least-squares slope of Y on the
    chosen covariates; a singular Gram matrix falls back to a tiny ridge.
    """
    cols = sorted(covariate_cols) if covariate_cols is not None else list(range(data.d))
    if not cols:
        raise ValidationError("cuped needs at least one covariate column")
    X = data.X[:, cols]
    Z = np.column_stack([np.ones(data.n), X])
    gram = Z.T @ Z
    rhs = Z.T @ data.Y
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        ridge = 1e-8 * np.eye(Z.shape[1])
        ridge[0, 0] = 0.0
        beta = np.linalg.solve(gram + ridge, rhs)
    theta = beta[1:]
    adjusted = data.Y - (X - X.mean(axis=0)) @ theta
    estimate, variance = _dim_parts(adjusted, data.A)
    return _result("CUPED", estimate, variance)


def zdml_test(pseudo: PseudoOutcomes) -> BaselineResult:
    """z-test on the doubly robust pseudo-outcomes: z = sum(mu)/(sqrt(n)*sigma)."""
    n = pseudo.n
    estimate = pseudo.mean
    if pseudo.is_degenerate:
        raise DegenerateVarianceError("pseudo-outcome sample has zero variance")
    z = math.sqrt(n) * estimate / pseudo.sigma_hat
    p_one = max(normal_cdf(-z), _P_FLOOR)
    p_two = max(2.0 * normal_cdf(-abs(z)), _P_FLOOR)
    return BaselineResult(method="zDML", estimate=float(estimate),
                          variance=float(pseudo.sigma_hat**2 / n), z=float(z),
                          p_one_sided=float(p_one), p_two_sided=float(p_two))
