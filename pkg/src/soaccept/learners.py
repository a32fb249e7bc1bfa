"""Train/test splitting, randomized hyperparameter search, importances.

The split keeps floor(n * fraction) rows for training under a seeded
permutation.  The search samples forest configurations uniformly and
scores each with stratified k-fold cross-validation, rebalancing inside
every training fold so no synthetic point ever leaks into validation.
Score ties prefer fewer trees, then shallower ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .forest import ForestModel, RfParams, fit_forest, forest_predict_proba
from .mlp import MlpModel, mlp_predict_proba
from .resample import ResamplePlan, apply_plan
from .seeding import derive_seed


class LearnerError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.7
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise LearnerError("train_fraction must lie strictly between 0 and 1")


def split_indices(n: int, spec: SplitSpec):
    """Disjoint (train, test) row indices; train gets floor(n * fraction)."""
    if n < 2:
        raise LearnerError("need at least 2 rows to split")
    n_train = math.floor(n * spec.train_fraction)
    if n_train == 0 or n_train == n:
        raise LearnerError("split leaves one side empty; adjust train_fraction")
    perm = np.random.default_rng(spec.seed).permutation(n)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


def split_train_test(x, y, spec: SplitSpec):
    x = np.asarray(x)
    y = np.asarray(y)
    train_idx, test_idx = split_indices(x.shape[0], spec)
    return x[train_idx], y[train_idx], x[test_idx], y[test_idx]


@dataclass(frozen=True)
class SearchSpace:
    """Candidate grid for the randomized forest search."""

    n_estimators: tuple = (100, 200, 300, 400, 500, 600, 700, 800, 900, 1000, 1100, 1200)
    max_depth: tuple = (10, 21, 32, 43, 54, 65, 76, 87, 98, 110)
    min_samples_split: tuple = (2, 3, 5, 8, 10)
    min_samples_leaf: tuple = (1, 2, 3, 5)
    max_features: tuple = ("sqrt", "auto")
    bootstrap: tuple = (True,)
    n_iterations: int = 100
    cv_folds: int = 4
    seed: int = 0

    def __post_init__(self):
        for name in ("n_estimators", "max_depth", "min_samples_split",
                     "min_samples_leaf", "max_features", "bootstrap"):
            if len(getattr(self, name)) == 0:
                raise LearnerError(f"search space field {name} must not be empty")
        if self.n_iterations < 1:
            raise LearnerError("n_iterations must be >= 1")
        if self.cv_folds < 2:
            raise LearnerError("cv_folds must be >= 2")


@dataclass(frozen=True)
class SearchResult:
    best: RfParams
    trials: tuple  # one dict per iteration, in sampling order


def stratified_kfold(y, n_folds: int, seed: int):
    """Validation-fold index arrays with per-class round-robin dealing."""
    y = np.asarray(y)
    if n_folds < 2:
        raise LearnerError("n_folds must be >= 2")
    if n_folds > y.size:
        raise LearnerError("more folds than rows")
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(n_folds)]
    for label in np.unique(y):
        members = np.nonzero(y == label)[0]
        for i, row in enumerate(members[rng.permutation(members.size)]):
            folds[i % n_folds].append(int(row))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def _draw_params(rng, space: SearchSpace) -> dict:
    pick = lambda options: options[int(rng.integers(len(options)))]
    return {
        "n_estimators": pick(space.n_estimators),
        "max_depth": pick(space.max_depth),
        "min_samples_split": pick(space.min_samples_split),
        "min_samples_leaf": pick(space.min_samples_leaf),
        "max_features": pick(space.max_features),
        "bootstrap": pick(space.bootstrap),
    }


def _cv_score(x, y, combo: dict, folds, plan: ResamplePlan, space: SearchSpace):
    key = ":".join(str(combo[k]) for k in sorted(combo))
    accuracies = []
    all_rows = np.arange(x.shape[0])
    for fi, val_idx in enumerate(folds):
        train_idx = np.setdiff1d(all_rows, val_idx, assume_unique=True)
        fold_plan = replace(plan, seed=derive_seed(plan.seed, f"cv-fold:{fi}"))
        x_fit, y_fit = apply_plan(x[train_idx], y[train_idx], fold_plan)
        params = RfParams(seed=derive_seed(space.seed, f"fit:{key}:fold:{fi}"), **combo)
        model = fit_forest(x_fit, y_fit, params)
        pred = (forest_predict_proba(model, x[val_idx]) >= 0.5).astype(np.int64)
        accuracies.append(float(np.mean(pred == y[val_idx])))
    return accuracies


def random_search(x, y, space: SearchSpace, plan: ResamplePlan) -> SearchResult:
    """Uniformly sample configurations and rank them by mean CV accuracy.

    Repeated draws reuse the cached score.  The winner is the highest
    mean accuracy; exact ties fall to fewer trees, then lower depth,
    then first appearance.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    folds = stratified_kfold(y, space.cv_folds, derive_seed(space.seed, "cv-folds"))
    rng = np.random.default_rng(derive_seed(space.seed, "search"))
    cache: dict = {}
    trials = []
    best_combo = None
    best_key = None
    for _ in range(space.n_iterations):
        combo = _draw_params(rng, space)
        cache_key = tuple(sorted(combo.items()))
        if cache_key in cache:
            accuracies = cache[cache_key]
        else:
            accuracies = _cv_score(x, y, combo, folds, plan, space)
            cache[cache_key] = accuracies
        mean_acc = float(np.mean(accuracies))
        trials.append(
            {"params": dict(combo), "fold_accuracies": list(accuracies),
             "mean_accuracy": mean_acc}
        )
        key = (-mean_acc, combo["n_estimators"], combo["max_depth"])
        if best_key is None or key < best_key:
            best_key = key
            best_combo = combo
    best = RfParams(seed=derive_seed(space.seed, "best"), **best_combo)
    return SearchResult(best=best, trials=tuple(trials))


def permutation_importance(predict_proba, x, y, seed: int, n_rounds: int = 5):
    """Mean accuracy drop when one column is shuffled, clamped at zero.

    Each column gets its own derived generator, so scores do not depend
    on evaluation order.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    n, d = x.shape
    base = float(np.mean((predict_proba(x) >= 0.5).astype(np.int64) == y))
    drops = np.zeros(d)
    for j in range(d):
        rng = np.random.default_rng(derive_seed(seed, f"perm:{j}"))
        acc = 0.0
        for _ in range(n_rounds):
            xp = x.copy()
            xp[:, j] = xp[rng.permutation(n), j]
            acc += float(np.mean((predict_proba(xp) >= 0.5).astype(np.int64) == y))
        drops[j] = base - acc / n_rounds
    return np.maximum(drops, 0.0)


def _normalize(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    total = float(values.sum())
    if total <= 1e-12:
        return np.full(values.size, 1.0 / values.size)
    return values / total


@dataclass(frozen=True)
class ImportanceReport:
    names: tuple
    forest: tuple  # normalized impurity-decrease weights, sum 1
    mlp: tuple  # normalized permutation weights, sum 1


def normalized_importance_report(
    names,
    forest_model: ForestModel,
    mlp_model: MlpModel,
    x_test_scaled,
    y_test,
    seed: int = 0,
    n_rounds: int = 5,
) -> ImportanceReport:
    """Per-feature weight columns for both models, each summing to 1.

    The forest column is its normalized mean impurity decrease; the
    network column is seeded permutation importance on the (scaled)
    test split.
    """
    names = tuple(names)
    if len(names) != forest_model.n_features or len(names) != mlp_model.n_features:
        raise LearnerError("feature-name count does not match the models")
    drops = permutation_importance(
        lambda m: mlp_predict_proba(mlp_model, m), x_test_scaled, y_test,
        seed=derive_seed(seed, "mlp-permutation"), n_rounds=n_rounds,
    )
    return ImportanceReport(
        names=names,
        forest=tuple(float(v) for v in _normalize(forest_model.importances)),
        mlp=tuple(float(v) for v in _normalize(drops)),
    )
