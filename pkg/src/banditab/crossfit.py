"""Cross-fitted doubly robust pseudo-outcome construction.

Nuisance models (outcome regressions per arm, propensity) are trained on the
complement of each fold and applied only to that fold, so no subject is
scored by a model that saw it. The doubly robust combination of the two
nuisances is unbiased for the average treatment effect when either one is
correctly specified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CrossFitError, ValidationError
from .learners import LearnerSpec, predict_probability, random_partition
from .policy import PseudoOutcomes
from .rng import int_seed_for, rng_for
from .validation import as_binary_vector, as_float_matrix, as_float_vector

__all__ = [
    "Dataset",
    "NuisanceFits",
    "cross_fit",
    "dr_pseudo_outcomes",
    "ate_point_estimate",
    "assert_out_of_fold_purity",
]


@dataclass(frozen=True)
class Dataset:
    """Observational triples: covariates, outcome, binary treatment flag."""

    X: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    fold_id: np.ndarray | None = None

    def __post_init__(self):
        X = as_float_matrix("X", self.X)
        Y = as_float_vector("Y", self.Y)
        A = as_binary_vector("A", self.A)
        if not (X.shape[0] == Y.size == A.size):
            raise ValidationError(
                f"row mismatch: X has {X.shape[0]}, Y has {Y.size}, A has {A.size}")
        if X.shape[0] < 1:
            raise ValidationError("dataset is empty")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "A", A)
        if self.fold_id is not None:
            fid = np.asarray(self.fold_id, dtype=np.int64)
            if fid.shape != (X.shape[0],):
                raise ValidationError("fold_id must have one entry per row")
            object.__setattr__(self, "fold_id", fid)

    @property
    def n(self) -> int:
        return int(self.Y.size)

    @property
    def d(self) -> int:
        return int(self.X.shape[1])


@dataclass(frozen=True)
class NuisanceFits:
    """Out-of-fold nuisance predictions, with fold bookkeeping for audits."""

    m0_hat: np.ndarray
    m1_hat: np.ndarray
    e_hat: np.ndarray
    clip_eps: float = 0.01
    fold_id: np.ndarray | None = None
    fold_train_rows: tuple = ()

    def __post_init__(self):
        m0 = as_float_vector("m0_hat", self.m0_hat)
        m1 = as_float_vector("m1_hat", self.m1_hat)
        e = as_float_vector("e_hat", self.e_hat)
        if not (m0.size == m1.size == e.size):
            raise ValidationError("nuisance vectors must have equal length")
        if np.any(e < self.clip_eps - 1e-12) or np.any(e > 1.0 - self.clip_eps + 1e-12):
            raise ValidationError("e_hat must lie within [clip_eps, 1 - clip_eps]")
        object.__setattr__(self, "m0_hat", m0)
        object.__setattr__(self, "m1_hat", m1)
        object.__setattr__(self, "e_hat", e)


def _folds_cover_both_arms(fold_id: np.ndarray, A: np.ndarray, k: int) -> bool:
    for j in range(k):
        comp = fold_id != j
        if not (np.any(A[comp] == 1) and np.any(A[comp] == 0)):
            return False
    return True


def _stratified_partition(A: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    fold_id = np.empty(A.size, dtype=np.int64)
    for arm in (0, 1):
        rows = np.flatnonzero(A == arm)
        order = rng.permutation(rows.size)
        for j, chunk in enumerate(np.array_split(rows[order], k)):
            fold_id[chunk] = j
    return fold_id


def cross_fit(data: Dataset, learner_spec: LearnerSpec, k: int = 2,
              known_propensity: float | None = None, seed: int = 0,
              clip_eps: float = 0.01) -> NuisanceFits:
    """Out-of-fold nuisance predictions for every subject.

    Folds are a seeded random partition of near-equal sizes (or
    ``data.fold_id`` when supplied). A randomized partition that leaves some
    training complement single-armed is redrawn up to 5 times, then replaced
    by a stratified partition. When ``known_propensity`` is given (a
    randomized trial), the propensity column is that constant and no
    propensity model is trained.
    """
    n = data.n
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k!r}")
    if n < 2 * k:
        raise ValidationError(f"need n >= 2k rows, got n={n}, k={k}")
    if not (np.any(data.A == 1) and np.any(data.A == 0)):
        raise CrossFitError("both treatment arms must be non-empty for cross-fitting")
    if known_propensity is not None and not 0.0 < known_propensity < 1.0:
        raise ValidationError("known_propensity must lie strictly inside (0, 1)")
    if not 0.0 < clip_eps < 0.5:
        raise ValidationError("clip_eps must lie in (0, 0.5)")

    if data.fold_id is not None:
        fold_id = data.fold_id
        if fold_id.min() < 0 or fold_id.max() >= k:
            raise ValidationError("fold_id entries must lie in 0..k-1")
        if not _folds_cover_both_arms(fold_id, data.A, k):
            raise CrossFitError("supplied folds leave a training complement single-armed")
    else:
        fold_id = None
        for attempt in range(5):
            candidate = random_partition(n, k, rng_for(seed, "folds", attempt))
            if _folds_cover_both_arms(candidate, data.A, k):
                fold_id = candidate
                break
        if fold_id is None:
            fold_id = _stratified_partition(data.A, k, rng_for(seed, "folds", "stratified"))
            if not _folds_cover_both_arms(fold_id, data.A, k):
                raise CrossFitError("cannot form folds whose complements contain both arms")

    m0_hat = np.empty(n)
    m1_hat = np.empty(n)
    e_hat = np.full(n, known_propensity if known_propensity is not None else np.nan)
    train_rows = []
    prop_spec = learner_spec.for_task("binary_probability")
    reg_spec = learner_spec.for_task("regression")
    for j in range(k):
        hold = fold_id == j
        comp = np.flatnonzero(~hold)
        train_rows.append(comp)
        for arm, out in ((0, m0_hat), (1, m1_hat)):
            rows = comp[data.A[comp] == arm]
            model = reg_spec.build(int_seed_for(seed, "m", arm, j))
            model.fit(data.X[rows], data.Y[rows])
            model.train_row_ids_ = rows
            out[hold] = model.predict(data.X[hold])
        if known_propensity is None:
            model = prop_spec.build(int_seed_for(seed, "e", j))
            model.fit(data.X[comp], data.A[comp].astype(float))
            model.train_row_ids_ = comp
            e_hat[hold] = predict_probability(model, data.X[hold])

    e_hat = np.clip(e_hat, clip_eps, 1.0 - clip_eps)
    return NuisanceFits(m0_hat=m0_hat, m1_hat=m1_hat, e_hat=e_hat, clip_eps=clip_eps,
                        fold_id=fold_id, fold_train_rows=tuple(train_rows))


def dr_pseudo_outcomes(data: Dataset, fits: NuisanceFits) -> PseudoOutcomes:
    """Per-subject doubly robust effect estimates.

    mu_i = m1(x_i) - m0(x_i) + A_i*(Y_i - m1(x_i))/e(x_i)
           - (1 - A_i)*(Y_i - m0(x_i))/(1 - e(x_i))
    """
    if fits.m1_hat.size != data.n:
        raise ValidationError("nuisance fits are not aligned with the dataset")
    a = data.A.astype(float)
    mu = (fits.m1_hat - fits.m0_hat
          + a * (data.Y - fits.m1_hat) / fits.e_hat
          - (1.0 - a) * (data.Y - fits.m0_hat) / (1.0 - fits.e_hat))
    return PseudoOutcomes.from_values(mu)


def ate_point_estimate(pseudo: PseudoOutcomes) -> float:
    """The doubly robust point estimate: the pseudo-outcome sample mean."""
    return pseudo.mean


def assert_out_of_fold_purity(fits: NuisanceFits) -> None:
    """Raise unless no subject's fold appears in its own training rows."""
    if fits.fold_id is None or not fits.fold_train_rows:
        raise ValidationError("fits carry no fold bookkeeping")
    for j, rows in enumerate(fits.fold_train_rows):
        held = np.flatnonzero(fits.fold_id == j)
        if np.intersect1d(held, rows).size:
            raise AssertionError(f"fold {j} predictions used in-fold training rows")
