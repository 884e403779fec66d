"""Built-in supervised learners behind the sklearn fit/predict contract.

Two gradient-boosted-tree hyperparameter profiles (``gbt_a``, ``gbt_b``) play
the role usually filled by the big boosting libraries, alongside regularized
linear/logistic models and a stacking ensemble with a linear meta-learner.
Everything here is an sklearn-style estimator (``get_params``/``set_params``
via ``BaseEstimator``), so cross-fitting also accepts any third-party
estimator with the same surface.

For the ``binary_probability`` task ``predict`` returns probabilities,
clipped to [1e-6, 1 - 1e-6]; ``predict_proba`` is provided for ecosystem
compatibility.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.tree import DecisionTreeRegressor

from .errors import ValidationError
from .rng import rng_for
from .validation import as_float_matrix, as_float_vector

__all__ = [
    "LearnerSpec",
    "GradientBoostedTrees",
    "RidgeRegression",
    "LogisticModel",
    "StackingModel",
    "fit_learner",
    "predict",
    "fit_stacking",
    "predict_probability",
    "random_partition",
]

PROB_CLIP = 1e-6

GBT_PROFILES = {
    "gbt_a": dict(trees=200, depth=6, learning_rate=0.05, min_leaf=20),
    "gbt_b": dict(trees=300, depth=4, learning_rate=0.1, min_leaf=10),
}

_GBT_KEYS = {"trees", "depth", "learning_rate", "min_leaf", "subsample", "l2"}
_LINEAR_KEYS = {"l2"}
_STACK_KEYS = {"k_inner"}


def random_partition(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold ids 0..k-1 via a uniform permutation cut into near-equal chunks.

    Sizes differ by at most one, with the larger folds first.
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k!r}")
    if n < k:
        raise ValidationError(f"cannot split {n} rows into {k} folds")
    order = rng.permutation(n)
    fold_id = np.empty(n, dtype=np.int64)
    for j, chunk in enumerate(np.array_split(order, k)):
        fold_id[chunk] = j
    return fold_id


@dataclass(frozen=True)
class LearnerSpec:
    """Declarative learner choice: kind, hyperparameter overrides, task."""

    kind: str = "linear"
    hyperparams: dict = field(default_factory=dict)
    task: str = "regression"
    bases: tuple = ()

    def __post_init__(self):
        if self.kind not in ("gbt_a", "gbt_b", "gbt", "linear", "logistic", "stacking"):
            raise ValidationError(f"unknown learner kind {self.kind!r}")
        if self.task not in ("regression", "binary_probability"):
            raise ValidationError(f"unknown task {self.task!r}")
        allowed = (_GBT_KEYS if self.kind.startswith("gbt")
                   else _STACK_KEYS if self.kind == "stacking" else _LINEAR_KEYS)
        unknown = set(self.hyperparams) - allowed
        if unknown:
            raise ValidationError(f"unsupported hyperparams for {self.kind}: {sorted(unknown)}")
        if self.kind == "stacking" and self.bases and len(self.bases) < 2:
            raise ValidationError("stacking needs at least 2 base specs")

    def for_task(self, task: str) -> "LearnerSpec":
        """The same learner family adapted to a different prediction task."""
        kind = self.kind
        if task == "binary_probability" and kind == "linear":
            kind = "logistic"
        if task == "regression" and kind == "logistic":
            kind = "linear"
        bases = tuple(b.for_task(task) for b in self.bases)
        return LearnerSpec(kind=kind, hyperparams=dict(self.hyperparams), task=task, bases=bases)

    def build(self, seed: int):
        """Instantiate the estimator this spec describes."""
        if self.kind in ("gbt_a", "gbt_b", "gbt"):
            params = dict(GBT_PROFILES.get(self.kind, GBT_PROFILES["gbt_a"]))
            params.update(self.hyperparams)
            return GradientBoostedTrees(
                n_trees=int(params.get("trees", 200)),
                max_depth=int(params.get("depth", 6)),
                learning_rate=float(params.get("learning_rate", 0.05)),
                min_leaf=int(params.get("min_leaf", 20)),
                subsample=float(params.get("subsample", 1.0)),
                l2=float(params.get("l2", 0.0)),
                task=self.task,
                random_state=int(seed),
            )
        if self.kind == "linear":
            return RidgeRegression(l2=float(self.hyperparams.get("l2", 0.0)))
        if self.kind == "logistic":
            return LogisticModel(l2=float(self.hyperparams.get("l2", 0.0)))
        bases = self.bases or tuple(
            LearnerSpec(kind=k, task=self.task) for k in ("gbt_a", "gbt_b"))
        return StackingModel(
            base_specs=bases,
            k_inner=int(self.hyperparams.get("k_inner", 2)),
            task=self.task,
            random_state=int(seed),
        )


def _check_xy(X, y, task: str) -> tuple[np.ndarray, np.ndarray]:
    X = as_float_matrix("X", X)
    y = as_float_vector("y", y)
    if X.shape[0] != y.size:
        raise ValidationError(f"X has {X.shape[0]} rows but y has {y.size}")
    if task == "binary_probability" and not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("binary task requires y in {0, 1}")
    return X, y


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class GradientBoostedTrees(BaseEstimator):
    """Boosted regression trees with exact greedy splits.

    Trees are induced by sklearn's exact splitter on the current residuals;
    leaf values are recomputed as regularized Newton steps (plain means for
    squared error), so depth 0 collapses to the target mean. ``loss_curve_``
    records the full-sample training loss after every round.
    """

    def __init__(self, n_trees=200, max_depth=6, learning_rate=0.05, min_leaf=20,
                 subsample=1.0, l2=0.0, task="regression", random_state=0):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.subsample = subsample
        self.l2 = l2
        self.task = task
        self.random_state = random_state

    def _validate_params(self):
        if self.n_trees < 0 or self.max_depth < 0 or self.min_leaf < 1:
            raise ValidationError("n_trees, max_depth must be >= 0 and min_leaf >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if not 0.0 < self.subsample <= 1.0:
            raise ValidationError("subsample must lie in (0, 1]")
        if self.l2 < 0:
            raise ValidationError("l2 must be >= 0")
        if self.task not in ("regression", "binary_probability"):
            raise ValidationError(f"unknown task {self.task!r}")

    def _loss(self, y: np.ndarray, raw: np.ndarray) -> float:
        if self.task == "regression":
            return float(np.mean((y - raw) ** 2))
        p = np.clip(_sigmoid(raw), PROB_CLIP, 1.0 - PROB_CLIP)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))

    def fit(self, X, y):
        self._validate_params()
        X, y = _check_xy(X, y, self.task)
        n = y.size
        if n < self.min_leaf:
            raise ValidationError(f"need at least min_leaf={self.min_leaf} rows, got {n}")
        binary = self.task == "binary_probability"
        if binary:
            pbar = float(np.clip(y.mean(), PROB_CLIP, 1.0 - PROB_CLIP))
            self.base_score_ = float(np.log(pbar / (1.0 - pbar)))
            single_class = y.min() == y.max()
        else:
            self.base_score_ = float(y.mean())
            single_class = False

        rng = rng_for(self.random_state, "gbt")
        raw = np.full(n, self.base_score_)
        self._stages = []
        self.loss_curve_ = [self._loss(y, raw)]
        rounds = 0 if (self.max_depth == 0 or single_class) else self.n_trees
        for _ in range(rounds):
            p = _sigmoid(raw) if binary else None
            resid = y - (p if binary else raw)
            if self.subsample < 1.0:
                m = max(1, int(round(self.subsample * n)))
                rows = rng.choice(n, size=m, replace=False)
            else:
                rows = slice(None)
            tree = DecisionTreeRegressor(
                max_depth=self.max_depth,
                min_samples_leaf=self.min_leaf,
                random_state=int(rng.integers(0, 2**31)),
            )
            tree.fit(X[rows], resid[rows])
            leaf = tree.apply(X[rows])
            n_nodes = tree.tree_.node_count
            num = np.bincount(leaf, weights=resid[rows], minlength=n_nodes)
            hess = p[rows] * (1.0 - p[rows]) if binary else np.ones(leaf.size)
            den = np.bincount(leaf, weights=hess, minlength=n_nodes) + self.l2
            values = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
            self._stages.append((tree, values))
            raw = raw + self.learning_rate * values[tree.apply(X)]
            self.loss_curve_.append(self._loss(y, raw))
        self.n_features_in_ = X.shape[1]
        return self

    def _raw_predict(self, X: np.ndarray) -> np.ndarray:
        raw = np.full(X.shape[0], self.base_score_)
        for tree, values in self._stages:
            raw = raw + self.learning_rate * values[tree.apply(X)]
        return raw

    def predict(self, X) -> np.ndarray:
        X = as_float_matrix("X", X)
        if X.shape[0] == 0:
            return np.empty(0)
        raw = self._raw_predict(X)
        if self.task == "binary_probability":
            return np.clip(_sigmoid(raw), PROB_CLIP, 1.0 - PROB_CLIP)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "binary_probability":
            raise ValidationError("predict_proba requires the binary_probability task")
        p = self.predict(X)
        return np.column_stack([1.0 - p, p])


class RidgeRegression(BaseEstimator):
    """Linear least squares with an optional L2 penalty on the slopes."""

    def __init__(self, l2=0.0):
        self.l2 = l2

    def fit(self, X, y):
        X, y = _check_xy(X, y, "regression")
        Z = np.column_stack([np.ones(X.shape[0]), X])
        if self.l2 > 0:
            penalty = np.eye(Z.shape[1]) * self.l2
            penalty[0, 0] = 0.0
            beta = np.linalg.solve(Z.T @ Z + penalty, Z.T @ y)
        else:
            beta, *_ = np.linalg.lstsq(Z, y, rcond=None)
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = as_float_matrix("X", X)
        if X.shape[0] == 0:
            return np.empty(0)
        return self.intercept_ + X @ self.coef_


class LogisticModel(BaseEstimator):
    """Logistic regression fit by damped IRLS; predictions are probabilities."""

    def __init__(self, l2=0.0, max_iter=100, tol=1e-10):
        self.l2 = l2
        self.max_iter = max_iter
        self.tol = tol

    def fit(self, X, y):
        X, y = _check_xy(X, y, "binary_probability")
        n, d = X.shape
        if y.min() == y.max():
            self.intercept_ = None
            self.constant_ = float(np.clip(y.mean(), PROB_CLIP, 1.0 - PROB_CLIP))
            self.coef_ = np.zeros(d)
            self.n_features_in_ = d
            return self
        self.constant_ = None
        Z = np.column_stack([np.ones(n), X])
        penalty = np.eye(d + 1) * self.l2
        penalty[0, 0] = 0.0
        beta = np.zeros(d + 1)
        for _ in range(self.max_iter):
            p = _sigmoid(Z @ beta)
            w = p * (1.0 - p) + 1e-10
            grad = Z.T @ (y - p) - penalty @ beta
            hess = (Z * w[:, None]).T @ Z + penalty + 1e-10 * np.eye(d + 1)
            step = np.linalg.solve(hess, grad)
            beta = beta + step
            if np.max(np.abs(step)) < self.tol:
                break
        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        self.n_features_in_ = d
        return self

    def predict(self, X) -> np.ndarray:
        X = as_float_matrix("X", X)
        if X.shape[0] == 0:
            return np.empty(0)
        if self.constant_ is not None:
            p = np.full(X.shape[0], self.constant_)
        else:
            p = _sigmoid(self.intercept_ + X @ self.coef_)
        return np.clip(p, PROB_CLIP, 1.0 - PROB_CLIP)

    def predict_proba(self, X) -> np.ndarray:
        p = self.predict(X)
        return np.column_stack([1.0 - p, p])


class StackingModel(BaseEstimator):
    """Stacked ensemble: inner-cross-fitted base predictions feed a linear meta-model.

    Meta-features are out-of-fold, so the meta-fit sees no leakage; base models
    are then refit on the full sample for prediction.
    """

    def __init__(self, base_specs=(), k_inner=2, task="regression", random_state=0):
        self.base_specs = base_specs
        self.k_inner = k_inner
        self.task = task
        self.random_state = random_state

    def fit(self, X, y):
        specs = tuple(self.base_specs)
        if len(specs) < 2:
            raise ValidationError("stacking needs at least 2 base specs")
        if self.k_inner < 2:
            raise ValidationError("k_inner must be >= 2")
        X, y = _check_xy(X, y, self.task)
        n = y.size
        rng = rng_for(self.random_state, "stacking")
        fold_id = random_partition(n, self.k_inner, rng)
        meta_X = np.empty((n, len(specs)))
        seeds = [int(rng.integers(0, 2**63)) for _ in specs]
        for j, spec in enumerate(specs):
            for k in range(self.k_inner):
                hold = fold_id == k
                model = spec.for_task(self.task).build(seeds[j])
                model.fit(X[~hold], y[~hold])
                meta_X[hold, j] = model.predict(X[hold])
        self.base_models_ = [
            spec.for_task(self.task).build(seeds[j]).fit(X, y)
            for j, spec in enumerate(specs)
        ]
        if self.task == "regression":
            self.meta_model_ = RidgeRegression(l2=0.0).fit(meta_X, y)
        else:
            self.meta_model_ = LogisticModel(l2=0.0).fit(meta_X, y)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = as_float_matrix("X", X)
        if X.shape[0] == 0:
            return np.empty(0)
        meta_X = np.column_stack([m.predict(X) for m in self.base_models_])
        out = self.meta_model_.predict(meta_X)
        if self.task == "binary_probability":
            out = np.clip(out, PROB_CLIP, 1.0 - PROB_CLIP)
        return out

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "binary_probability":
            raise ValidationError("predict_proba requires the binary_probability task")
        p = self.predict(X)
        return np.column_stack([1.0 - p, p])


def fit_learner(spec: LearnerSpec, X, y, seed: int):
    """Build and fit the estimator described by ``spec``."""
    return spec.build(seed).fit(X, y)


def predict(model, X) -> np.ndarray:
    """Predictions from a fitted learner (probabilities for binary tasks)."""
    return np.asarray(model.predict(X), dtype=float)


def fit_stacking(base_specs, X, y, k_inner: int, seed: int,
                 task: str = "regression") -> StackingModel:
    """Fit a stacking ensemble over the given base specs."""
    return StackingModel(base_specs=tuple(base_specs), k_inner=k_inner,
                         task=task, random_state=seed).fit(X, y)


def predict_probability(model, X) -> np.ndarray:
    """Probability of class 1 from any estimator, preferring ``predict_proba``."""
    if hasattr(model, "predict_proba"):
        proba = np.asarray(model.predict_proba(X), dtype=float)
        return proba[:, 1] if proba.ndim == 2 else proba
    return np.asarray(model.predict(X), dtype=float)
