"""Axis-aligned CART regression trees with squared-error splits."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigError, EmptyDataError, ShapeError
from ._validation import check_matrix

LEAF = -1


@dataclass(frozen=True)
class TreeConfig:
    min_leaf: int = 30
    max_depth: int = 4

    def __post_init__(self):
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")

    def to_dict(self):
        return asdict(self)


class RegressionTree:
    """Binary regression tree stored as flat node arrays.

    Node ``i`` is a leaf when ``feature[i] == -1``; otherwise samples with
    ``x[feature[i]] <= threshold[i]`` go to ``left[i]`` and the rest to
    ``right[i]``. Node 0 is the root.
    """

    def __init__(self, feature, threshold, left, right, value, feature_dim):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.feature_dim = int(feature_dim)
        n = len(self.feature)
        if n == 0 or not all(len(a) == n for a in (self.threshold, self.left, self.right, self.value)):
            raise ShapeError("tree node arrays must be non-empty and equally long")
        if np.any(self.feature >= self.feature_dim):
            raise ShapeError("split feature index out of range")

    @classmethod
    def leaf(cls, value, feature_dim):
        return cls([LEAF], [0.0], [LEAF], [LEAF], [value], feature_dim)

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def n_leaves(self):
        return int(np.sum(self.feature == LEAF))

    def apply(self, X):
        """Index of the leaf reached by every row of ``X``."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise ShapeError(f"expected (n, {self.feature_dim}) features, got {X.shape}")
        node = np.zeros(len(X), dtype=np.int64)
        active = np.nonzero(self.feature[node] != LEAF)[0]
        while active.size:
            at = node[active]
            go_left = X[active, self.feature[at]] <= self.threshold[at]
            node[active] = np.where(go_left, self.left[at], self.right[at])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X):
        return self.value[self.apply(X)]

    def to_dict(self):
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d, feature_dim):
        return cls(d["feature"], d["threshold"], d["left"], d["right"], d["value"], feature_dim)

    def __eq__(self, other):
        if not isinstance(other, RegressionTree):
            return NotImplemented
        return self.feature_dim == other.feature_dim and all(
            np.array_equal(getattr(self, a), getattr(other, a))
            for a in ("feature", "threshold", "left", "right", "value")
        )

    def __repr__(self):
        return f"RegressionTree(n_nodes={self.n_nodes}, feature_dim={self.feature_dim})"


def _best_split(X, y, min_leaf):
    """Return ``(gain, feature, threshold, left_mask)`` or None.

    ``gain`` is the reduction in summed squared error. Ties keep the lower
    feature index, then the lower threshold.
    """
    n = len(y)
    resid = y - y.mean()
    total = resid.sum()
    base = total * total / n
    best = None
    sizes = np.arange(1, n, dtype=np.float64)
    allowed = (sizes >= min_leaf) & (sizes <= n - min_leaf)
    if not allowed.any():
        return None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        cs = np.cumsum(resid[order])[:-1]
        ok = allowed & (xs[:-1] < xs[1:])
        if not ok.any():
            continue
        left_sum = cs[ok]
        nl = sizes[ok]
        gains = left_sum**2 / nl + (total - left_sum) ** 2 / (n - nl) - base
        j = int(np.argmax(gains))
        gain = float(gains[j])
        if best is None or gain > best[0]:
            pos = int(np.nonzero(ok)[0][j])
            lo, hi = xs[pos], xs[pos + 1]
            thr = lo + (hi - lo) / 2.0
            if not lo <= thr < hi:
                thr = lo
            best = (gain, f, float(thr))
    if best is None:
        return None
    gain, f, thr = best
    sse = float(np.dot(resid, resid))
    if gain <= 0.0 or gain <= 1e-12 * sse:
        return None
    return gain, f, thr, X[:, f] <= thr


def train_tree(X, y, config: TreeConfig = TreeConfig()) -> RegressionTree:
    """Greedy top-down CART fit of ``y`` on ``X``.

    A node becomes a leaf at ``config.max_depth``, when it holds fewer than
    ``2 * config.min_leaf`` samples, or when no admissible split lowers the
    squared error. Leaf values are plain target means.
    """
    X = check_matrix(X)
    y = np.asarray(y, dtype=np.float64)
    if len(X) == 0:
        raise EmptyDataError("cannot fit a tree on zero samples")
    if y.shape != (len(X),):
        raise ShapeError(f"targets of shape {y.shape} do not match {len(X)} samples")
    if not np.all(np.isfinite(y)):
        raise ValueError("non-finite regression targets")

    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        if depth >= config.max_depth or len(idx) < 2 * config.min_leaf:
            return node
        split = _best_split(X[idx], y[idx], config.min_leaf)
        if split is None:
            return node
        _, f, thr, go_left = split
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return RegressionTree(feature, threshold, left, right, value, X.shape[1])


def predict_tree(tree: RegressionTree, features) -> float:
    x = np.asarray(features, dtype=np.float64)
    if x.shape != (tree.feature_dim,):
        raise ShapeError(f"expected {tree.feature_dim} features, got shape {x.shape}")
    return float(tree.predict(x[None, :])[0])


class CARTRegressor(RegressorMixin, BaseEstimator):
    """scikit-learn wrapper around :func:`train_tree`."""

    def __init__(self, min_leaf=30, max_depth=4):
        self.min_leaf = min_leaf
        self.max_depth = max_depth

    def fit(self, X, y):
        self.tree_ = train_tree(X, y, TreeConfig(self.min_leaf, self.max_depth))
        self.n_features_in_ = self.tree_.feature_dim
        return self

    def predict(self, X):
        check_is_fitted(self, "tree_")
        return self.tree_.predict(check_matrix(X))
