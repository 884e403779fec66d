"""Permuted reruns of the bandit statistic with Cauchy p-value aggregation.

A single policy run depends on the sample order (the "p-value lottery"), so
the test is repeated over B seeded reorderings of the pseudo-outcomes and the
per-run p-values are merged through the Cauchy combination, which tolerates
their dependence. Nuisances, the pooled spread estimate, and the mean-term
weight are all computed once before any reordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .crossfit import Dataset, cross_fit, dr_pseudo_outcomes
from .errors import DegenerateVarianceError, ValidationError
from .learners import LearnerSpec
from .policy import (
    LambdaConfig,
    arm1_increments,
    optimal_finals,
    select_lambda_bootstrap,
    select_lambda_threshold,
    statistic_p_value,
)
from .rng import int_seed_for, rng_for

__all__ = [
    "PermutationPlan",
    "TestReport",
    "cauchy_combine",
    "cauchy_antisymmetry_gap",
    "pwtab_test",
]

_P_CLIP = 1e-15
DEFAULT_ALPHAS = (0.01, 0.05, 0.1)


@dataclass(frozen=True)
class PermutationPlan:
    """B index bijections on 0..n-1, reproducible from (n, b, seed)."""

    b: int
    seed: int
    permutations: np.ndarray

    def __post_init__(self):
        perms = np.asarray(self.permutations, dtype=np.int64)
        if perms.ndim != 2 or perms.shape[0] != self.b:
            raise ValidationError("permutations must be a (b, n) index array")
        expected = np.arange(perms.shape[1])
        for row in perms:
            if not np.array_equal(np.sort(row), expected):
                raise ValidationError("every permutation row must be a bijection")
        object.__setattr__(self, "permutations", perms)

    @classmethod
    def build(cls, n: int, b: int, seed: int) -> "PermutationPlan":
        if n < 1 or b < 1:
            raise ValidationError("n and b must be >= 1")
        perms = np.stack([rng_for(seed, "perm", i).permutation(n) for i in range(b)])
        return cls(b=b, seed=int(seed), permutations=perms)


@dataclass(frozen=True)
class TestReport:
    """Everything one aggregated test run produced."""

    per_perm_stats: tuple
    per_perm_p: tuple
    cauchy_stat: float
    p_aggregated: float
    lambda_used: float
    sigma_hat: float
    ate_estimate: float
    n: int
    b: int
    decision_at: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_perm_stats": list(self.per_perm_stats),
            "per_perm_p": list(self.per_perm_p),
            "cauchy_stat": self.cauchy_stat,
            "p_aggregated": self.p_aggregated,
            "lambda_used": self.lambda_used,
            "sigma_hat": self.sigma_hat,
            "ate_estimate": self.ate_estimate,
            "n": self.n,
            "b": self.b,
            "decision_at": {f"{level:g}": bool(v) for level, v in self.decision_at.items()},
        }


def cauchy_combine(p_values) -> tuple[float, float]:
    """Cauchy combination of p-values.

    Returns (c_stat, p_aggregated) with c_stat the mean of tan((0.5 - p) * pi)
    and p_aggregated = 0.5 - arctan(c_stat)/pi. Inputs are clipped to
    [1e-15, 1 - 1e-15] before the tangent, which preserves ordering and stays
    far below practical decision thresholds.
    """
    arr = np.asarray(p_values, dtype=float)
    if arr.size == 0:
        raise ValidationError("cannot combine an empty p-value list")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError("p-values must lie in [0, 1]")
    clipped = np.clip(arr, _P_CLIP, 1.0 - _P_CLIP)
    c_stat = float(np.mean(np.tan((0.5 - clipped) * math.pi)))
    p_agg = 0.5 - math.atan(c_stat) / math.pi
    return c_stat, float(min(max(p_agg, _P_CLIP), 1.0 - _P_CLIP))


def cauchy_antisymmetry_gap(p_values) -> float:
    """|C(p) + C(1-p)|; zero up to rounding, by antisymmetry of the tangent."""
    arr = np.asarray(p_values, dtype=float)
    c_direct, _ = cauchy_combine(arr)
    c_mirror, _ = cauchy_combine(1.0 - arr)
    return abs(c_direct + c_mirror)


def pwtab_test(data: Dataset, learner_spec: LearnerSpec, k: int = 2,
               lambda_config: LambdaConfig | None = None, b: int = 25,
               seed: int = 0, known_propensity: float | None = None,
               plan: PermutationPlan | None = None, clip_eps: float = 0.01,
               alphas=DEFAULT_ALPHAS) -> TestReport:
    """The full permuted pipeline on one dataset.

    Cross-fit nuisances, form pseudo-outcomes and their pooled spread, pick
    the mean-term weight, then rerun the policy statistic over ``b`` seeded
    reorderings (each with its own first-arm coin derived from ``(seed, b)``)
    and aggregate the p-values. Fully reproducible from (data, config, seed).
    """
    lambda_config = lambda_config or LambdaConfig()
    fits = cross_fit(data, learner_spec, k=k, known_propensity=known_propensity,
                     seed=int_seed_for(seed, "crossfit"), clip_eps=clip_eps)
    pseudo = dr_pseudo_outcomes(data, fits)
    if pseudo.is_degenerate:
        raise DegenerateVarianceError("pseudo-outcome sample has zero variance")

    if lambda_config.mode == "fixed":
        lam = float(lambda_config.lam)
    elif lambda_config.mode == "threshold":
        lam = select_lambda_threshold(pseudo.sigma_hat, pseudo.n, lambda_config.tau)
    else:
        lam = select_lambda_bootstrap(
            data, list(lambda_config.grid), lambda_config.b_boot, lambda_config.alpha,
            int_seed_for(seed, "lambda"), learner_spec=learner_spec, k=k,
            known_propensity=known_propensity)

    if plan is None:
        plan = PermutationPlan.build(data.n, b, int_seed_for(seed, "permutations"))
    elif plan.permutations.shape[1] != data.n:
        raise ValidationError("plan does not match the dataset size")

    base = arm1_increments(pseudo, lam)
    increments = base[plan.permutations]
    coins = np.fromiter(
        (rng_for(seed, "first-arm", i).integers(0, 2) for i in range(plan.b)),
        dtype=np.int64, count=plan.b)
    finals = optimal_finals(increments, coins)
    p_values = [statistic_p_value(float(t)) for t in finals]
    c_stat, p_agg = cauchy_combine(p_values)
    return TestReport(
        per_perm_stats=tuple(float(t) for t in finals),
        per_perm_p=tuple(p_values),
        cauchy_stat=c_stat,
        p_aggregated=p_agg,
        lambda_used=lam,
        sigma_hat=pseudo.sigma_hat,
        ate_estimate=pseudo.mean,
        n=data.n,
        b=plan.b,
        decision_at={float(a): p_agg <= a for a in alphas},
    )
