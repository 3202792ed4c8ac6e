"""Supervised layer: CART decision trees, bagging, and the hull-combined classifier.

Trees are grown greedily on the Gini criterion with deterministic
tie-breaking (lowest feature index, then lowest threshold), so a fixed
seed gives bit-identical committees.  The combined classifier votes a
bagged committee over feature vectors extended with the hull-membership
scale alpha as the last input column; prediction ties break toward
"entangled", the conservative call for a separability certifier.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .cha import ConvexHull, alpha as hull_alpha, extend_dataset
from .errors import DimensionMismatchError, InvariantViolationError
from .qstate import DensityMatrix, featurize_entries
from .sampling import LABEL_ENTANGLED, LABEL_SEPARABLE, LabeledDataset


@dataclass(frozen=True)
class TreeParams:
    """CART hyperparameters; the split criterion is Gini impurity."""

    max_depth: int = 24
    min_leaf: int = 5
    split_criterion: str = "gini"

    def __post_init__(self):
        if self.max_depth < 1 or self.min_leaf < 1:
            raise InvariantViolationError("max_depth and min_leaf must be >= 1")
        if self.split_criterion != "gini":
            raise InvariantViolationError(f"unsupported criterion {self.split_criterion!r}")


class DecisionTree:
    """Binary CART tree over real features with {-1, +1} leaves.

    Stored as parallel node arrays (feature < 0 marks a leaf) so batch
    prediction is a handful of vectorized descents.
    """

    __slots__ = ("input_dim", "feature", "threshold", "left", "right", "value")

    def __init__(self, input_dim, feature, threshold, left, right, value):
        self.input_dim = int(input_dim)
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=float)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.value = np.asarray(value, dtype=np.int8)

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def depth(self) -> int:
        def node_depth(i):
            if self.feature[i] < 0:
                return 0
            return 1 + max(node_depth(self.left[i]), node_depth(self.right[i]))

        return node_depth(0)

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Labels for a (n, input_dim) matrix or a single feature vector."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.input_dim:
            raise DimensionMismatchError(
                f"tree expects {self.input_dim} features, got {x.shape[1]}"
            )
        node = np.zeros(x.shape[0], dtype=np.int32)
        active = np.flatnonzero(self.feature[node] >= 0)
        while active.size:
            cur = node[active]
            go_left = x[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        out = self.value[node]
        return int(out[0]) if single else out

    def to_dict(self) -> dict:
        """Nested {feature, threshold, left, right} / {leaf} representation."""

        def build(i):
            if self.feature[i] < 0:
                return {"leaf": int(self.value[i])}
            return {
                "feature": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "left": build(int(self.left[i])),
                "right": build(int(self.right[i])),
            }

        return build(0)

    @classmethod
    def from_dict(cls, d: dict, input_dim: int) -> "DecisionTree":
        feature, threshold, left, right, value = [], [], [], [], []

        def add(node) -> int:
            i = len(feature)
            if "leaf" in node:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                value.append(int(node["leaf"]))
                return i
            feature.append(int(node["feature"]))
            threshold.append(float(node["threshold"]))
            left.append(-1)
            right.append(-1)
            value.append(0)
            left[i] = add(node["left"])
            right[i] = add(node["right"])
            return i

        add(d)
        return cls(input_dim, feature, threshold, left, right, value)


def _leaf_label(labels: np.ndarray) -> int:
    """Majority label; exact ties go to +1 (entangled)."""
    pos = int(np.count_nonzero(labels == LABEL_ENTANGLED))
    return LABEL_ENTANGLED if 2 * pos >= labels.size else LABEL_SEPARABLE


def _best_split(x: np.ndarray, y01: np.ndarray, min_leaf: int):
    """(weighted_gini, feature, threshold) of the best valid split, or None.

    Features are scanned in index order and improvements must be strict, so
    impurity ties resolve to the lowest feature index; within a feature the
    first (lowest-threshold) minimizer wins.
    """
    n, n_feat = x.shape
    total_pos = int(y01.sum())
    best = None
    for f in range(n_feat):
        order = np.argsort(x[:, f], kind="stable")
        xs = x[order, f]
        left_pos = np.cumsum(y01[order])[:-1]
        n_left = np.arange(1, n)
        n_right = n - n_left
        valid = xs[:-1] != xs[1:]
        if min_leaf > 1:
            valid &= (n_left >= min_leaf) & (n_right >= min_leaf)
        if not valid.any():
            continue
        right_pos = total_pos - left_pos
        gini_left = 1.0 - (left_pos**2 + (n_left - left_pos) ** 2) / n_left**2
        gini_right = 1.0 - (right_pos**2 + (n_right - right_pos) ** 2) / n_right**2
        weighted = (n_left * gini_left + n_right * gini_right) / n
        weighted[~valid] = np.inf
        i = int(np.argmin(weighted))
        if best is None or weighted[i] < best[0]:
            best = (float(weighted[i]), f, float(0.5 * (xs[i] + xs[i + 1])))
    return best


def train_tree(
    features: np.ndarray,
    labels: np.ndarray,
    params: TreeParams = TreeParams(),
    rng: Optional[np.random.Generator] = None,
) -> DecisionTree:
    """Grow a CART tree; rng is accepted for interface uniformity but the
    greedy splitter is fully deterministic and draws nothing from it."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvariantViolationError("training needs a non-empty (n, d) feature matrix")
    if y.shape != (x.shape[0],):
        raise DimensionMismatchError("labels length must match feature rows")
    y01 = (y == LABEL_ENTANGLED).astype(np.int64)

    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(_leaf_label(y[idx]))
        sub = y01[idx]
        pure = sub.min() == sub.max()
        if pure or depth >= params.max_depth or idx.size < 2 * params.min_leaf:
            return node
        split = _best_split(x[idx], sub, params.min_leaf)
        if split is None:
            return node
        gini_here = 1.0 - (sub.mean() ** 2 + (1.0 - sub.mean()) ** 2)
        w, f, t = split
        if w >= gini_here:  # no strict impurity decrease
            return node
        mask = x[idx, f] <= t
        feature[node] = f
        threshold[node] = t
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return DecisionTree(x.shape[1], feature, threshold, left, right, value)


def predict_tree(tree: DecisionTree, x) -> int:
    """Root-to-leaf descent for one sample."""
    return int(tree.predict(np.asarray(x, dtype=float)))


@dataclass
class BaggedCommittee:
    """L independently bootstrapped trees voting by majority (ties -> +1)."""

    trees: List[DecisionTree]
    input_dim: int

    @property
    def l_size(self) -> int:
        return len(self.trees)

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        votes = np.zeros(x.shape[0], dtype=np.int64)
        for tree in self.trees:
            votes += tree.predict(x)
        out = np.where(votes >= 0, LABEL_ENTANGLED, LABEL_SEPARABLE).astype(np.int8)
        return int(out[0]) if single else out


def _train_one_tree(args):
    x, y, params, child_rng = args
    idx = child_rng.integers(0, x.shape[0], size=x.shape[0])
    return train_tree(x[idx], y[idx], params)


def train_bagging(
    features: np.ndarray,
    labels: np.ndarray,
    l_size: int = 100,
    params: TreeParams = TreeParams(),
    rng: Optional[np.random.Generator] = None,
    *,
    workers: int = 1,
) -> BaggedCommittee:
    """Train L trees on size-n bootstrap resamples (with replacement)."""
    x = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvariantViolationError("training needs a non-empty (n, d) feature matrix")
    if l_size < 1:
        raise InvariantViolationError(f"committee size must be >= 1, got {l_size}")
    if rng is None:
        rng = np.random.default_rng()
    jobs = [(x, y, params, child) for child in rng.spawn(l_size)]
    if workers > 1 and l_size > 1 and "fork" in multiprocessing.get_all_start_methods():
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(min(workers, l_size)) as pool:
            trees = pool.map(_train_one_tree, jobs)
    else:
        trees = [_train_one_tree(j) for j in jobs]
    return BaggedCommittee(trees, x.shape[1])


def predict_committee(committee: BaggedCommittee, x) -> int:
    """Majority vote for one sample; exact ties return +1 (entangled)."""
    return int(committee.predict(np.asarray(x, dtype=float)))


@dataclass
class BchaModel:
    """Bagged committee over (features, alpha) inputs, bound to its hull."""

    committee: BaggedCommittee
    hull_ref: ConvexHull

    def __post_init__(self):
        if self.committee.input_dim != self.hull_ref.dims.feature_dim + 1:
            raise DimensionMismatchError(
                "committee input dim must be hull feature_dim + 1"
            )

    @property
    def input_dim(self) -> int:
        return self.committee.input_dim

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Votes over already-extended (coords, alpha) rows."""
        return self.committee.predict(x)


def train_bcha(
    hull: ConvexHull,
    ds: LabeledDataset,
    l_size: int = 100,
    params: TreeParams = TreeParams(),
    rng: Optional[np.random.Generator] = None,
    *,
    workers: int = 1,
) -> BchaModel:
    """Bagging over hull-extended features; computes alpha first if missing."""
    if ds.dims != hull.dims:
        raise DimensionMismatchError("dataset dims do not match hull dims")
    if not ds.has_alpha:
        ds = extend_dataset(hull, ds, workers=workers)
    committee = train_bagging(
        ds.extended_matrix(), ds.labels, l_size, params, rng, workers=workers
    )
    return BchaModel(committee, hull)


def predict_bcha(model: BchaModel, rho: DensityMatrix) -> int:
    """Featurize, score against the model's hull, and take the committee vote."""
    if rho.dims != model.hull_ref.dims:
        raise DimensionMismatchError("state dims do not match the model's hull")
    p = featurize_entries(rho.dims, rho.entries)
    a = hull_alpha(model.hull_ref, p).alpha
    return int(model.committee.predict(np.concatenate([p, [a]])))


@dataclass
class ChaClassifier:
    """The hull criterion itself as a classifier over extended rows."""

    hull: ConvexHull

    @property
    def input_dim(self) -> int:
        return self.hull.dims.feature_dim + 1

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(x[:, -1] >= 1.0, LABEL_SEPARABLE, LABEL_ENTANGLED).astype(np.int8)


def evaluate(classifier, ds: LabeledDataset) -> float:
    """Mean misclassification rate of any predictor over a dataset.

    Classifiers over raw features receive the coordinate matrix; classifiers
    over extended features receive (coords, alpha) and require the dataset's
    alpha column to be filled.
    """
    if len(ds) == 0:
        raise InvariantViolationError("cannot evaluate on an empty dataset")
    dim = classifier.input_dim
    if dim == ds.dims.feature_dim:
        x = ds.coords
    elif dim == ds.dims.feature_dim + 1:
        x = ds.extended_matrix()
    else:
        raise DimensionMismatchError(
            f"classifier input dim {dim} matches neither raw nor extended features"
        )
    pred = classifier.predict(x)
    return float(np.mean(pred != ds.labels))
