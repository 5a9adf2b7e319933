import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from smartboost.exceptions import ConfigError, EmptyDataError, ShapeError
from smartboost.trees import CARTRegressor, RegressionTree, TreeConfig, predict_tree, train_tree


def sse(tree, X, y):
    return float(((tree.predict(X) - y) ** 2).sum())


def test_constant_targets_give_single_leaf():
    X = np.random.default_rng(0).normal(size=(100, 3))
    tree = train_tree(X, np.full(100, 5.0), TreeConfig(min_leaf=5))
    assert tree.n_nodes == 1 and tree.value[0] == 5.0


def test_two_clusters_closed_form():
    X = np.array([[-1.0]] * 30 + [[1.0]] * 30)
    y = X[:, 0].copy()
    tree = train_tree(X, y, TreeConfig(min_leaf=30))
    assert tree.n_nodes == 3
    assert tree.feature[0] == 0 and tree.threshold[0] == 0.0
    assert tree.value[tree.left[0]] == -1.0 and tree.value[tree.right[0]] == 1.0


def test_min_leaf_larger_than_data():
    y = np.arange(10.0)
    tree = train_tree(np.arange(10.0)[:, None], y, TreeConfig(min_leaf=11))
    assert tree.n_nodes == 1 and tree.value[0] == pytest.approx(4.5)


def test_errors():
    with pytest.raises(EmptyDataError):
        train_tree(np.zeros((0, 2)), np.zeros(0))
    with pytest.raises(ShapeError):
        train_tree(np.zeros((3, 2)), np.zeros(4))
    with pytest.raises(ConfigError):
        TreeConfig(min_leaf=0)
    with pytest.raises(ConfigError):
        TreeConfig(max_depth=0)


class TestPredict:
    def test_single_leaf(self):
        assert predict_tree(RegressionTree.leaf(3.0, 2), [7.0, -1.0]) == 3.0

    def test_routing(self):
        tree = RegressionTree([0, -1, -1], [0.0, 0, 0], [1, -1, -1], [2, -1, -1], [0.0, -1.0, 1.0], 1)
        assert predict_tree(tree, [-2.0]) == -1.0
        assert predict_tree(tree, [0.0]) == -1.0  # boundary goes left
        assert predict_tree(tree, [0.5]) == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            predict_tree(RegressionTree.leaf(0.0, 2), [1.0])


def test_ties_prefer_lower_feature_index():
    X = np.array([[0.0, 0.0]] * 5 + [[1.0, 1.0]] * 5)
    y = np.array([0.0] * 5 + [1.0] * 5)
    tree = train_tree(X, y, TreeConfig(min_leaf=1))
    assert tree.feature[0] == 0


def test_ties_prefer_lower_threshold():
    # splitting after x=0 or after x=2 removes the same error
    X = np.array([0.0, 1.0, 1.0, 2.0])[:, None]
    y = np.array([0.0, 1.0, 1.0, 0.0])
    tree = train_tree(X, y, TreeConfig(min_leaf=1, max_depth=1))
    assert tree.threshold[0] == 0.5


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 2**31), st.integers(1, 15), st.integers(1, 5))
def test_invariants(seed, min_leaf, depth):
    r = np.random.default_rng(seed)
    n = int(r.integers(1, 120))
    X = np.round(r.normal(size=(n, 3)), 1)
    y = np.sin(3 * X[:, 0]) + X[:, 1] * X[:, 2] + 0.1 * r.normal(size=n)
    tree = train_tree(X, y, TreeConfig(min_leaf, depth))
    assert sse(tree, X, y) <= float(((y - y.mean()) ** 2).sum()) + 1e-9
    counts = np.bincount(tree.apply(X), minlength=tree.n_nodes)
    leaves = np.nonzero(tree.feature == -1)[0]
    if tree.n_nodes > 1:
        assert counts[leaves].min() >= min_leaf
    # leaf value is the mean of its training targets
    for leaf in leaves:
        sel = tree.apply(X) == leaf
        assert tree.value[leaf] == pytest.approx(y[sel].mean())
    assert np.all(tree.feature < 3)
    assert tree == train_tree(X, y, TreeConfig(min_leaf, depth))


def test_each_split_lowers_error():
    r = np.random.default_rng(3)
    X = r.normal(size=(400, 4))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float) + 0.1 * r.normal(size=400)
    prev = np.inf
    for depth in range(1, 6):
        cur = sse(train_tree(X, y, TreeConfig(10, depth)), X, y)
        assert cur <= prev + 1e-9
        prev = cur


def test_sklearn_wrapper():
    r = np.random.default_rng(1)
    X = r.normal(size=(200, 2))
    y = np.where(X[:, 0] > 0, 2.0, -2.0)
    est = CARTRegressor(min_leaf=5, max_depth=2).fit(X, y)
    assert est.score(X, y) == pytest.approx(1.0)
    assert clone(est).get_params() == {"min_leaf": 5, "max_depth": 2}


def test_serialization_round_trip():
    r = np.random.default_rng(2)
    X = r.normal(size=(100, 3))
    tree = train_tree(X, X[:, 0] ** 2, TreeConfig(5, 3))
    assert RegressionTree.from_dict(tree.to_dict(), 3) == tree
