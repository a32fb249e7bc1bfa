"""Random forest classifier built on axis-aligned Gini trees.

Trees grow depth-first on bootstrap samples, examining a random feature
subset at every node.  Candidate thresholds are midpoints between
consecutive distinct sorted values; ties in impurity are broken toward
the lowest feature index, then the lowest threshold, so refitting is
reproducible bit for bit.  Rows with value <= threshold go left.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .seeding import derive_seed

MODEL_SCHEMA_VERSION = 1


class ForestError(ValueError):
    pass


@dataclass(frozen=True)
class RfParams:
    """Forest hyperparameters; defaults follow the tuned baseline."""

    n_estimators: int = 200
    max_depth: int = 60
    min_samples_split: int = 8
    min_samples_leaf: int = 3
    max_features: str | int = "sqrt"
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ForestError("n_estimators must be >= 1")
        if self.max_depth < 1:
            raise ForestError("max_depth must be >= 1")
        if self.min_samples_split < 2:
            raise ForestError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ForestError("min_samples_leaf must be >= 1")
        if isinstance(self.max_features, str):
            if self.max_features not in ("sqrt", "auto", "all"):
                raise ForestError(
                    "max_features must be 'sqrt', 'auto', 'all', or a positive int"
                )
        elif self.max_features < 1:
            raise ForestError("integer max_features must be >= 1")


@dataclass
class DecisionTree:
    """Flat array encoding of one fitted tree (index 0 is the root)."""

    feature: np.ndarray  # int32, -1 marks a leaf
    threshold: np.ndarray  # float64, 0.0 at leaves
    left: np.ndarray  # int32, -1 at leaves
    right: np.ndarray  # int32, -1 at leaves
    proba1: np.ndarray  # float64, class-1 fraction of training rows at the node
    feature_decrease: np.ndarray  # float64 (d,), weighted Gini decrease per feature

    @property
    def n_nodes(self) -> int:
        return int(self.feature.size)


@dataclass
class ForestModel:
    params: RfParams
    trees: list[DecisionTree]
    oob_error: float
    importances: np.ndarray  # (d,), nonnegative, sums to 1
    n_features: int
    feature_names: tuple[str, ...] | None = None


def gini(labels) -> float:
    """Gini impurity 1 - sum(p_c^2) of a binary label array."""
    labels = np.asarray(labels)
    n = labels.size
    if n == 0:
        return 0.0
    p1 = float(np.count_nonzero(labels)) / n
    p0 = 1.0 - p1
    return 1.0 - p0 * p0 - p1 * p1


def n_sub_features(d: int, max_features) -> int:
    if max_features in ("sqrt", "auto"):
        return min(d, math.ceil(math.sqrt(d)))
    if max_features == "all":
        return d
    return min(d, int(max_features))


def _feature_subset(rng, d: int, m: int) -> np.ndarray:
    if m >= d:
        return np.arange(d)
    # sorted so the tie-break order never depends on the draw order
    return np.sort(rng.choice(d, size=m, replace=False))


def _best_split(x, y, idx, feats, min_leaf):
    """Best (feature, threshold, weighted child impurity) over `feats`.

    Returns None when no cut satisfies the leaf-size constraint.  Ties
    keep the lowest feature index, then the lowest threshold.
    """
    y_node = y[idx]
    total = idx.size
    total1 = int(y_node.sum())
    best = None  # (w, feature, threshold)
    for f in feats:
        vals = x[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y_node[order]
        distinct = sv[1:] != sv[:-1]
        if not distinct.any():
            continue
        pos = np.nonzero(distinct)[0]  # cut after sorted position pos
        n_l = pos + 1
        n_r = total - n_l
        ok = (n_l >= min_leaf) & (n_r >= min_leaf)
        if not ok.any():
            continue
        pos = pos[ok]
        n_l = n_l[ok]
        n_r = n_r[ok]
        ones_l = np.cumsum(sy)[pos]
        ones_r = total1 - ones_l
        g_l = 1.0 - (ones_l / n_l) ** 2 - ((n_l - ones_l) / n_l) ** 2
        g_r = 1.0 - (ones_r / n_r) ** 2 - ((n_r - ones_r) / n_r) ** 2
        w = (n_l * g_l + n_r * g_r) / total
        j = int(np.argmin(w))  # first minimum = lowest threshold
        thr = (sv[pos[j]] + sv[pos[j] + 1]) / 2.0
        if best is None or w[j] < best[0]:
            best = (float(w[j]), int(f), float(thr))
    return best


def fit_tree(x, y, params: RfParams, feature_subsampler=None, seed: int = 0, rng=None):
    """Grow one Gini decision tree.

    `feature_subsampler(rng)` returns the candidate feature indices for
    a node; by default it draws ceil-sqrt many (per `params.max_features`).
    A node becomes a leaf when pure, smaller than min_samples_split, at
    max_depth, or without any cut honouring min_samples_leaf.  Zero-gain
    splits are allowed, which is what lets depth-2 trees shatter XOR.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ForestError("x must be 2-d with one label per row")
    if x.shape[0] == 0:
        raise ForestError("cannot fit a tree on zero rows")
    n, d = x.shape
    if rng is None:
        rng = np.random.default_rng(seed)
    if feature_subsampler is None:
        m = n_sub_features(d, params.max_features)
        feature_subsampler = lambda r: _feature_subset(r, d, m)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    proba1: list[float] = []
    decrease = np.zeros(d)

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_node = idx.size
        ones = int(y[idx].sum())
        proba1.append(ones / n_node)
        if ones in (0, n_node):
            return node
        if n_node < params.min_samples_split or depth >= params.max_depth:
            return node
        feats = feature_subsampler(rng)
        best = _best_split(x, y, idx, feats, params.min_samples_leaf)
        if best is None:
            return node
        w, f, thr = best
        go_left = x[idx, f] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        if left_idx.size == 0 or right_idx.size == 0:
            # midpoint rounded onto a sample value; no usable cut
            return node
        p1 = ones / n_node
        parent_gini = 1.0 - p1 * p1 - (1.0 - p1) * (1.0 - p1)
        decrease[f] += (n_node / n) * max(parent_gini - w, 0.0)
        feature[node] = int(f)
        threshold[node] = thr
        left[node] = grow(left_idx, depth + 1)
        right[node] = grow(right_idx, depth + 1)
        return node

    grow(np.arange(n), 0)
    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        proba1=np.asarray(proba1, dtype=np.float64),
        feature_decrease=decrease,
    )


def tree_predict_proba1(tree: DecisionTree, x) -> np.ndarray:
    """Class-1 probability per row from one tree (leaf label fractions)."""
    x = np.asarray(x, dtype=np.float64)
    node = np.zeros(x.shape[0], dtype=np.int64)
    while True:
        f = tree.feature[node]
        active = np.nonzero(f >= 0)[0]
        if active.size == 0:
            break
        fa = f[active]
        go_left = x[active, fa] <= tree.threshold[node[active]]
        nxt = np.where(go_left, tree.left[node[active]], tree.right[node[active]])
        node[active] = nxt
    return tree.proba1[node]


def _fit_one(x, y, params, tree_index):
    n = x.shape[0]
    tree_seed = derive_seed(params.seed, f"tree:{tree_index}")
    rng = np.random.default_rng(tree_seed)
    if params.bootstrap:
        rows = rng.integers(0, n, size=n)
    else:
        rows = np.arange(n)
    tree = fit_tree(x[rows], y[rows], params, rng=rng)
    in_bag = np.zeros(n, dtype=bool)
    in_bag[rows] = True
    return tree, in_bag


def fit_forest(x, y, params: RfParams, threads: int = 1) -> ForestModel:
    """Fit `params.n_estimators` trees on bootstrap samples.

    Each tree draws from its own generator seeded by
    derive_seed(params.seed, "tree:<index>"), so the result is identical
    for any thread count.  OOB error is the misclassification rate over
    rows voted on only by trees whose bootstrap missed them; rows in
    every bag are excluded.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ForestError("x must be 2-d with one label per row")
    classes = np.unique(y)
    if classes.size < 2:
        raise ForestError("training labels contain a single class")
    if not np.isin(classes, (0, 1)).all():
        raise ForestError("labels must be 0/1")
    n, d = x.shape

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            fitted = list(
                pool.map(lambda i: _fit_one(x, y, params, i), range(params.n_estimators))
            )
    else:
        fitted = [_fit_one(x, y, params, i) for i in range(params.n_estimators)]

    trees = [t for t, _ in fitted]
    oob_sum = np.zeros(n)
    oob_votes = np.zeros(n, dtype=np.int64)
    for tree, in_bag in fitted:
        out = ~in_bag
        if out.any():
            oob_sum[out] += tree_predict_proba1(tree, x[out])
            oob_votes[out] += 1
    voted = oob_votes > 0
    if voted.any():
        pred = (oob_sum[voted] / oob_votes[voted]) >= 0.5
        oob_error = float(np.mean(pred.astype(np.int64) != y[voted]))
    else:
        oob_error = 0.0

    raw = np.zeros(d)
    for tree in trees:
        raw += tree.feature_decrease
    raw /= len(trees)
    total = float(raw.sum())
    importances = raw / total if total > 0.0 else np.full(d, 1.0 / d)

    return ForestModel(
        params=params,
        trees=trees,
        oob_error=oob_error,
        importances=importances,
        n_features=d,
    )


def forest_predict_proba(model: ForestModel, x) -> np.ndarray:
    """Mean class-1 probability over the ensemble, one value per row."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ForestError(f"expected {model.n_features} feature columns")
    acc = np.zeros(x.shape[0])
    for tree in model.trees:
        acc += tree_predict_proba1(tree, x)
    return acc / len(model.trees)


def forest_predict(model: ForestModel, x) -> np.ndarray:
    return (forest_predict_proba(model, x) >= 0.5).astype(np.int64)


def forest_to_dict(model: ForestModel) -> dict:
    return {
        "schema_version": MODEL_SCHEMA_VERSION,
        "kind": "random-forest",
        "params": {
            "n_estimators": model.params.n_estimators,
            "max_depth": model.params.max_depth,
            "min_samples_split": model.params.min_samples_split,
            "min_samples_leaf": model.params.min_samples_leaf,
            "max_features": model.params.max_features,
            "bootstrap": model.params.bootstrap,
            "seed": model.params.seed,
        },
        "n_features": model.n_features,
        "feature_names": list(model.feature_names) if model.feature_names else None,
        "oob_error": model.oob_error,
        "importances": [float(v) for v in model.importances],
        "trees": [
            {
                "feature": [int(v) for v in t.feature],
                "threshold": [float(v) for v in t.threshold],
                "left": [int(v) for v in t.left],
                "right": [int(v) for v in t.right],
                "proba1": [float(v) for v in t.proba1],
            }
            for t in model.trees
        ],
    }


def forest_from_dict(payload: dict) -> ForestModel:
    version = payload.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ForestError(f"unsupported model schema version: {version!r}")
    if payload.get("kind") != "random-forest":
        raise ForestError(f"not a forest model file: kind={payload.get('kind')!r}")
    params = RfParams(**payload["params"])
    d = int(payload["n_features"])
    trees = [
        DecisionTree(
            feature=np.asarray(t["feature"], dtype=np.int32),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int32),
            right=np.asarray(t["right"], dtype=np.int32),
            proba1=np.asarray(t["proba1"], dtype=np.float64),
            feature_decrease=np.zeros(d),
        )
        for t in payload["trees"]
    ]
    names = payload.get("feature_names")
    return ForestModel(
        params=params,
        trees=trees,
        oob_error=float(payload["oob_error"]),
        importances=np.asarray(payload["importances"], dtype=np.float64),
        n_features=d,
        feature_names=tuple(names) if names else None,
    )


def save_forest(model: ForestModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(forest_to_dict(model), fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_forest(path) -> ForestModel:
    with open(path, "r", encoding="utf-8") as fh:
        return forest_from_dict(json.load(fh))
