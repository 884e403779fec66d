"""Two-armed-bandit construction of the weighted mean-volatility statistic.

Each subject contributes one signed pseudo-outcome. Walking the sample in
order, the policy picks arm 1 while the running statistic is nonnegative and
arm 0 otherwise (the first arm is a seeded fair coin), which maximizes the
tail probability of the final statistic. With weight ``lam`` the statistic is

    T = sum_i [ lam/(1-lam) * mean(mu)^(arm_i) / n  +  mu_i^(arm_i) / (sqrt(n) * sigma_hat) ]

where arm 1 keeps the sign of ``mu_i`` and arm 0 flips it, and all prefix
values use the final-n normalizers. ``sigma_hat`` and ``mean`` are fixed
sample quantities, so permuted reruns reuse them unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest

from .distributions import normal_cdf
from .errors import DegenerateVarianceError, ValidationError
from .rng import rng_for
from .validation import as_float_vector, check_positive

__all__ = [
    "PseudoOutcomes",
    "PolicyTrace",
    "LambdaConfig",
    "arm1_increments",
    "run_optimal_policy",
    "fixed_policy_final",
    "optimal_finals",
    "statistic_p_value",
    "select_lambda_threshold",
    "select_lambda_bootstrap",
]


@dataclass(frozen=True)
class PseudoOutcomes:
    """Signed per-subject effect estimates with their sample mean and spread.

    ``sigma_hat`` is the ddof-1 standard deviation of ``mu_hat`` and ``mean``
    its arithmetic mean; both are recomputable from the vector.
    """

    mu_hat: np.ndarray
    mean: float
    sigma_hat: float

    def __post_init__(self):
        if self.mu_hat.ndim != 1 or self.mu_hat.size < 2:
            raise ValidationError("mu_hat must be a vector with at least 2 entries")
        if not np.all(np.isfinite(self.mu_hat)):
            raise ValidationError("mu_hat contains non-finite entries")
        if not (math.isfinite(self.mean) and math.isfinite(self.sigma_hat)):
            raise ValidationError("mean and sigma_hat must be finite")
        if self.sigma_hat < 0:
            raise ValidationError("sigma_hat must be >= 0")

    @classmethod
    def from_values(cls, mu_hat) -> "PseudoOutcomes":
        arr = as_float_vector("mu_hat", mu_hat, min_len=2).copy()
        arr.setflags(write=False)
        mean = float(arr.mean())
        sigma = float(math.sqrt(float(np.sum((arr - mean) ** 2)) / (arr.size - 1)))
        return cls(mu_hat=arr, mean=mean, sigma_hat=sigma)

    @property
    def n(self) -> int:
        return int(self.mu_hat.size)

    @property
    def is_degenerate(self) -> bool:
        """True when the sample spread is zero up to float dust.

        Nuisance fits on constant outcomes leave sigma_hat at ~1e-16 times the
        value scale instead of exactly 0; dividing by it would turn noise into
        an arbitrarily large statistic.
        """
        scale = max(abs(self.mean), float(np.max(np.abs(self.mu_hat))))
        if scale == 0.0:
            return True
        return self.sigma_hat <= 1e-12 * scale


@dataclass(frozen=True)
class PolicyTrace:
    """Arm choices and running statistic values of one optimal-policy run."""

    arms: np.ndarray
    partial_stats: np.ndarray
    first_arm_seed: int

    @property
    def final_statistic(self) -> float:
        return float(self.partial_stats[-1])


@dataclass(frozen=True)
class LambdaConfig:
    """How the mean-term weight is chosen.

    ``threshold`` derives the largest weight whose convergence-rate penalty
    stays below ``tau`` (the default rule); ``fixed`` uses ``lam`` as given;
    ``bootstrap`` picks the largest grid value that keeps the resampled null
    calibrated.
    """

    mode: str = "threshold"
    lam: float | None = None
    tau: float = 0.03
    grid: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)
    b_boot: int = 200
    alpha: float = 0.05

    def __post_init__(self):
        if self.mode not in ("threshold", "fixed", "bootstrap"):
            raise ValidationError(f"unknown lambda mode {self.mode!r}")
        if self.mode == "fixed":
            if self.lam is None or not (0.0 <= self.lam < 1.0):
                raise ValidationError("fixed mode requires lam in [0, 1)")
        if self.tau <= 0:
            raise ValidationError("tau must be > 0")


def arm1_increments(pseudo: PseudoOutcomes, lam: float) -> np.ndarray:
    """Per-step statistic increments when arm 1 is chosen; arm 0 negates them.

    A zero-variance sample (including the all-zero one) leaves the statistic
    undefined.
    """
    if not 0.0 <= lam < 1.0:
        raise ValidationError(f"lam must lie in [0, 1), got {lam!r}")
    if pseudo.is_degenerate:
        raise DegenerateVarianceError("pseudo-outcome sample has zero variance")
    n = pseudo.n
    mean_part = lam / (1.0 - lam) * pseudo.mean / n
    return mean_part + pseudo.mu_hat / (math.sqrt(n) * pseudo.sigma_hat)


def run_optimal_policy(pseudo: PseudoOutcomes, lam: float, seed: int) -> PolicyTrace:
    """Trace the sign-chasing policy over the sample in its given order.

    Deterministic in (sample order, lam, seed); the first arm is the seeded
    fair coin and every later arm is 1 exactly when the running statistic is
    nonnegative.
    """
    c = arm1_increments(pseudo, lam).tolist()
    first_arm = int(rng_for(seed, "first-arm").integers(0, 2))
    n = len(c)
    arms = np.empty(n, dtype=np.int64)
    partial = np.empty(n, dtype=float)
    t = 0.0
    for i in range(n):
        arm = first_arm if i == 0 else (1 if t >= 0.0 else 0)
        t = t + c[i] if arm == 1 else t - c[i]
        arms[i] = arm
        partial[i] = t
    arms.setflags(write=False)
    partial.setflags(write=False)
    return PolicyTrace(arms=arms, partial_stats=partial, first_arm_seed=int(seed))


def fixed_policy_final(pseudo: PseudoOutcomes, lam: float, arms) -> float:
    """Final statistic under a caller-supplied arm sequence.

    The all-ones sequence with ``lam = 0`` reduces the statistic to the plain
    z form ``sum(mu_hat) / (sqrt(n) * sigma_hat)``.
    """
    c = arm1_increments(pseudo, lam)
    arm_arr = np.asarray(arms, dtype=np.int64)
    if arm_arr.shape != c.shape:
        raise ValidationError("arms must have one entry per pseudo-outcome")
    if not np.isin(arm_arr, (0, 1)).all():
        raise ValidationError("arms must contain only 0/1")
    signs = 2.0 * arm_arr - 1.0
    return float(np.dot(signs, c))


def optimal_finals(increments: np.ndarray, first_arms) -> np.ndarray:
    """Final statistics of many policy runs, scanned in lockstep.

    ``increments`` has one row per run (the arm-1 increments in that run's
    sample order) and ``first_arms`` one 0/1 entry per run.
    """
    inc = np.asarray(increments, dtype=float)
    if inc.ndim == 1:
        inc = inc.reshape(1, -1)
    first = np.asarray(first_arms, dtype=np.int64).reshape(-1)
    if first.size != inc.shape[0]:
        raise ValidationError("need one first arm per run")
    steps = np.ascontiguousarray(inc.T)
    t = (2.0 * first - 1.0) * steps[0]
    for i in range(1, steps.shape[0]):
        ci = steps[i]
        t = np.where(t >= 0.0, t + ci, t - ci)
    return t


def statistic_p_value(t: float) -> float:
    """Normal-based two-tailed p-value 2*Phi(-|t|), floored away from zero."""
    if not math.isfinite(t):
        raise ValidationError(f"t must be finite, got {t!r}")
    return max(2.0 * normal_cdf(-abs(t)), 1e-300)


def select_lambda_threshold(sigma_hat: float, n: int, tau: float = 0.03) -> float:
    """Largest weight whose convergence penalty lam*sigma/((1-lam)*sqrt(n)) is tau.

    Closed form: lam = tau*sqrt(n) / (sigma_hat + tau*sqrt(n)).
    """
    sigma_hat = check_positive("sigma_hat", sigma_hat)
    tau = check_positive("tau", tau)
    if n < 2:
        raise ValidationError(f"n must be >= 2, got {n!r}")
    ts = tau * math.sqrt(n)
    return ts / (sigma_hat + ts)


def select_lambda_bootstrap(data, grid, b_boot: int, alpha: float, seed: int, *,
                            learner_spec=None, k: int = 2,
                            known_propensity: float | None = None) -> float:
    """Data-driven weight selection on null-enforcing control-only resamples.

    Each resample redraws both pseudo-arms from the control group, runs the
    full pipeline, and records the policy p-value. Grid values are examined in
    ascending order; a value passes while the resampled rejection rate at
    ``alpha`` stays at or below ``alpha`` and the p-values look uniform
    (KS test at level 0.05). Returns the largest passing value before the
    first failure, or the grid minimum when none pass.
    """
    from .crossfit import Dataset, cross_fit, dr_pseudo_outcomes
    from .learners import LearnerSpec

    grid = [float(g) for g in grid]
    if not grid or any(not 0.0 < g < 1.0 for g in grid) or sorted(grid) != grid:
        raise ValidationError("grid must be ascending values inside (0, 1)")
    if b_boot < 1:
        raise ValidationError("b_boot must be >= 1")
    control = np.flatnonzero(data.A == 0)
    if control.size == 0:
        raise ValidationError("control group is empty")
    if learner_spec is None:
        learner_spec = LearnerSpec(kind="linear")

    n = data.n
    n0 = int(control.size)
    p_by_lam: dict[float, list[float]] = {g: [] for g in grid}
    for b in range(b_boot):
        rng = rng_for(seed, "lambda-boot", b)
        rows0 = control[rng.integers(0, n0, size=n0)]
        rows1 = control[rng.integers(0, n0, size=n - n0)]
        rows = np.concatenate([rows0, rows1])
        resample = Dataset(
            X=data.X[rows],
            Y=data.Y[rows],
            A=np.concatenate([np.zeros(n0, dtype=np.int64),
                              np.ones(n - n0, dtype=np.int64)]),
        )
        fits = cross_fit(resample, learner_spec, k=k,
                         known_propensity=known_propensity,
                         seed=int(rng.integers(0, 2**63)))
        pseudo = dr_pseudo_outcomes(resample, fits)
        first_arm = int(rng.integers(0, 2))
        for lam in grid:
            t = float(optimal_finals(arm1_increments(pseudo, lam), [first_arm])[0])
            p_by_lam[lam].append(statistic_p_value(t))

    chosen = None
    for lam in grid:
        p = np.asarray(p_by_lam[lam])
        size_ok = float(np.mean(p <= alpha)) <= alpha
        uniform_ok = kstest(p, "uniform").pvalue > 0.05
        if size_ok and uniform_ok:
            chosen = lam
        else:
            break
    return chosen if chosen is not None else grid[0]
