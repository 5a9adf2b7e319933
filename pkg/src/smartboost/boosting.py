"""Structured gradient boosting with regression trees (S-MART).

One scoring function F(x, y_k = u) is shared by every factor. Each round
pools the point-wise negative functional gradients of all (candidate,
option) pairs in the corpus, fits a single regression tree to them and adds
it to the ensemble. ``mode="independent"`` swaps the structured marginals
for a per-candidate softmax, which gives the plain multiclass MART baseline.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import lattice as lat
from .exceptions import ConfigError, ShapeError
from .trees import RegressionTree, TreeConfig, train_tree
from ._validation import check_corpus, check_gold

logger = logging.getLogger(__name__)

LOSSES = ("log", "hinge")
MODES = ("structured", "independent")


@dataclass(frozen=True)
class BoostConfig:
    n_trees: int = 300
    learning_rate: float = 1.0
    tree: TreeConfig = field(default_factory=TreeConfig)
    loss: str = "log"
    mode: str = "structured"

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must be in (0, 1], got {self.learning_rate}")
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; expected one of {LOSSES}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["tree"] = TreeConfig(**d.get("tree", {}))
        return cls(**d)


@dataclass(frozen=True)
class GradientRecord:
    candidate: int
    option: int
    features: np.ndarray
    neg_gradient: float


class Ensemble:
    """Additive model ``F(phi) = sum_m eta_m * h_m(phi)``."""

    def __init__(self, feature_dim, trees=(), etas=(), metadata=None):
        self.feature_dim = int(feature_dim)
        self.trees = list(trees)
        self.etas = [float(e) for e in etas]
        self.metadata = dict(metadata or {})
        if len(self.trees) != len(self.etas):
            raise ShapeError("one eta per tree is required")
        for t in self.trees:
            if t.feature_dim != self.feature_dim:
                raise ShapeError(f"tree feature_dim {t.feature_dim} != ensemble {self.feature_dim}")

    def __len__(self):
        return len(self.trees)

    def append(self, tree: RegressionTree, eta: float):
        if tree.feature_dim != self.feature_dim:
            raise ShapeError(f"tree feature_dim {tree.feature_dim} != ensemble {self.feature_dim}")
        self.trees.append(tree)
        self.etas.append(float(eta))

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise ShapeError(f"expected (n, {self.feature_dim}) features, got {X.shape}")
        out = np.zeros(len(X))
        for tree, eta in zip(self.trees, self.etas):
            out += eta * tree.predict(X)
        return out

    def to_dict(self):
        return {
            "feature_dim": self.feature_dim,
            "metadata": self.metadata,
            "trees": [{"eta": eta, "nodes": t.to_dict()} for t, eta in zip(self.trees, self.etas)],
        }

    @classmethod
    def from_dict(cls, d):
        dim = d["feature_dim"]
        trees = [RegressionTree.from_dict(t["nodes"], dim) for t in d["trees"]]
        return cls(dim, trees, [t["eta"] for t in d["trees"]], d.get("metadata"))

    def __eq__(self, other):
        if not isinstance(other, Ensemble):
            return NotImplemented
        return (
            self.feature_dim == other.feature_dim
            and self.etas == other.etas
            and self.trees == other.trees
        )


def _split_rows(flat, lattice):
    return np.split(flat, np.cumsum(lattice.option_counts)[:-1]) if lattice.K else []


def score_table(ensemble: Ensemble, example) -> list:
    """F(x, y_k = u) for every candidate and option of ``example``."""
    if example.lattice.K == 0:
        return []
    if example.feature_dim != ensemble.feature_dim:
        raise ShapeError(
            f"example {example.id!r} has feature_dim {example.feature_dim}, "
            f"model expects {ensemble.feature_dim}"
        )
    return _split_rows(ensemble.predict(example.feature_matrix()), example.lattice)


def decode(lattice, scores, mode="structured"):
    """Predicted assignment: Viterbi when structured, per-candidate argmax otherwise."""
    if mode == "structured":
        return lat.viterbi(lattice, scores)[0]
    return lat.independent_decode(lat.check_scores(lattice, scores))


# Losses -------------------------------------------------------------------


def _gold(example):
    if example.gold is None:
        raise ValueError(f"example {example.id!r} has no gold assignment")
    check_gold(example.lattice, example.gold, example.id)
    return example.gold


def _hamming_augmented(scores, gold):
    out = []
    for row, g in zip(scores, gold):
        row = np.array(row, dtype=np.float64) + 1.0
        row[g] -= 1.0
        out.append(row)
    return out


def _softmax(row):
    z = np.exp(row - row.max())
    return z / z.sum()


def log_loss(example, scores) -> float:
    """Structured logistic loss ``ln Z(x) - S(x, y*)``."""
    gold = _gold(example)
    log_z = lat.log_partition(example.lattice, scores)
    return max(log_z - lat.assignment_score(scores, gold), 0.0)


def independent_log_loss(example, scores) -> float:
    """Sum of per-candidate softmax cross-entropies."""
    gold = _gold(example)
    rows = lat.check_scores(example.lattice, scores)
    return float(sum(lat._logsumexp(r) - r[g] for r, g in zip(rows, gold)))


def _augmented_decode(example, scores, mode):
    gold = _gold(example)
    rows = lat.check_scores(example.lattice, scores)
    aug = _hamming_augmented(rows, gold)
    y_hat = decode(example.lattice, aug, mode)
    margin = lat.assignment_score(aug, y_hat) - lat.assignment_score(rows, gold)
    return y_hat, max(margin, 0.0)


def hinge_loss(example, scores, mode="structured") -> float:
    """Hamming-margin hinge loss ``max_y [S(y) + H(y, y*)] - S(y*)``."""
    return _augmented_decode(example, scores, mode)[1]


def loss_value(example, scores, loss="log", mode="structured") -> float:
    if loss == "hinge":
        return hinge_loss(example, scores, mode)
    if mode == "independent":
        return independent_log_loss(example, scores)
    return log_loss(example, scores)


# Point-wise negative functional gradients ---------------------------------


def _indicator_minus(probs, gold):
    out = []
    for p, g in zip(probs, gold):
        ng = -np.asarray(p, dtype=np.float64)
        ng[g] += 1.0
        out.append(ng)
    return out


def negative_gradients(example, scores, loss="log", mode="structured"):
    """Per-candidate arrays of ``-g_ku`` plus the loss at ``scores``.

    Returns ``(neg_grads, loss_value)``; computing both from one inference
    pass keeps training at a single forward-backward per example per round.
    """
    gold = _gold(example)
    rows = lat.check_scores(example.lattice, scores)
    if loss == "hinge":
        y_hat, value = _augmented_decode(example, rows, mode)
        if value <= 0.0:
            return [np.zeros_like(r) for r in rows], 0.0
        if mode == "independent":
            # only candidates whose own margin is violated move
            aug = _hamming_augmented(rows, gold)
            y_hat = tuple(
                u if aug[k][u] > rows[k][gold[k]] else gold[k] for k, u in enumerate(y_hat)
            )
        return _indicator_minus([np.eye(len(r))[u] for r, u in zip(rows, y_hat)], gold), value
    if mode == "independent":
        probs = [_softmax(r) for r in rows]
        value = float(sum(lat._logsumexp(r) - r[g] for r, g in zip(rows, gold)))
    else:
        result = lat.marginals(example.lattice, rows)
        probs = result.marginals
        value = max(result.log_partition - lat.assignment_score(rows, gold), 0.0)
    return _indicator_minus(probs, gold), value


def _records(example, neg_grads):
    return [
        GradientRecord(k, u, example.features[k][u], float(row[u]))
        for k, row in enumerate(neg_grads)
        for u in range(len(row))
    ]


def pointwise_gradients_log(example, scores) -> list:
    """GradientRecords ``-g_ku = 1[y*_k = u] - P(y_k = u | x)`` (structured marginals)."""
    return _records(example, negative_gradients(example, scores, "log", "structured")[0])


def pointwise_gradients_independent(example, scores) -> list:
    return _records(example, negative_gradients(example, scores, "log", "independent")[0])


def hinge_gradients(example, scores, mode="structured") -> list:
    return _records(example, negative_gradients(example, scores, "hinge", mode)[0])


# Training -----------------------------------------------------------------


def train(corpus, config: BoostConfig = BoostConfig(), callback=None) -> Ensemble:
    """Fit an ensemble by functional gradient descent.

    The score of every (candidate, option) row is cached and updated with
    each new tree, so a round costs one inference per example plus one tree
    fit. ``ensemble.metadata["history"]`` holds ``(round, train_loss,
    seconds)`` rows where round 0 is the all-zero model; the loss is the
    corpus mean of the configured objective. ``callback(round, loss,
    seconds)`` is invoked for every row.
    """
    examples = [ex for ex in corpus]
    dim = check_corpus(examples, require_gold=True)
    blocks = [ex.feature_matrix() for ex in examples]
    offsets = np.cumsum([0] + [len(b) for b in blocks])
    X = np.vstack(blocks) if offsets[-1] else np.zeros((0, dim))
    flat = np.zeros(len(X))

    ensemble = Ensemble(dim, metadata={"loss": config.loss, "mode": config.mode, "config": config.to_dict()})
    history = []
    start = time.perf_counter()

    def emit(m, total):
        row = (m, total / len(examples), time.perf_counter() - start)
        history.append(row)
        logger.info("round %d train_loss %.6f (%.2fs)", *row)
        if callback is not None:
            callback(*row)

    def gradient_pass():
        targets = np.empty(len(X))
        total = 0.0
        for i, ex in enumerate(examples):
            lo, hi = offsets[i], offsets[i + 1]
            if lo == hi:
                continue
            rows = _split_rows(flat[lo:hi], ex.lattice)
            grads, value = negative_gradients(ex, rows, config.loss, config.mode)
            targets[lo:hi] = np.concatenate(grads)
            total += value
        return targets, total

    targets, total = gradient_pass()
    emit(0, total)
    for m in range(1, config.n_trees + 1):
        if len(X):
            tree = train_tree(X, targets, config.tree)
            flat += config.learning_rate * tree.predict(X)
        else:
            tree = RegressionTree.leaf(0.0, dim)
        ensemble.append(tree, config.learning_rate)
        targets, total = gradient_pass()
        emit(m, total)

    ensemble.metadata["history"] = [list(r) for r in history]
    return ensemble


class SMART(BaseEstimator):
    """Structured multiple additive regression trees.

    Parameters
    ----------
    n_trees : int, default=300
        Boosting rounds; one tree is added per round.
    learning_rate : float, default=1.0
        Shrinkage applied to every tree.
    min_leaf : int, default=30
        Minimum number of gradient records in a leaf.
    max_depth : int, default=4
    loss : {"log", "hinge"}, default="log"
    mode : {"structured", "independent"}, default="structured"
        ``"independent"`` ignores the overlap constraint in both training
        and decoding (the MART baseline).
    nil_bias : float, default=0.0
        Added to every Nil score before decoding.

    Attributes
    ----------
    ensemble_ : Ensemble
    train_log_ : list of (round, train_loss, seconds)
    n_features_in_ : int
    """

    def __init__(self, n_trees=300, learning_rate=1.0, min_leaf=30, max_depth=4,
                 loss="log", mode="structured", nil_bias=0.0):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.min_leaf = min_leaf
        self.max_depth = max_depth
        self.loss = loss
        self.mode = mode
        self.nil_bias = nil_bias

    def _config(self):
        return BoostConfig(
            n_trees=self.n_trees,
            learning_rate=self.learning_rate,
            tree=TreeConfig(self.min_leaf, self.max_depth),
            loss=self.loss,
            mode=self.mode,
        )

    def fit(self, X, y=None):
        """Fit on a list of LinkingExample.

        ``y``, when given, is a list of gold assignments replacing the ones
        stored on the examples.
        """
        X = list(X)
        if y is not None:
            if len(y) != len(X):
                raise ShapeError(f"{len(y)} gold assignments for {len(X)} examples")
            X = [ex.with_gold(g) for ex, g in zip(X, y)]
        self.ensemble_ = train(X, self._config())
        self.train_log_ = [tuple(r) for r in self.ensemble_.metadata["history"]]
        self.n_features_in_ = self.ensemble_.feature_dim
        return self

    @classmethod
    def from_ensemble(cls, ensemble, nil_bias=0.0):
        cfg = BoostConfig.from_dict(ensemble.metadata["config"])
        est = cls(cfg.n_trees, cfg.learning_rate, cfg.tree.min_leaf, cfg.tree.max_depth,
                  cfg.loss, cfg.mode, nil_bias)
        est.ensemble_ = ensemble
        est.train_log_ = [tuple(r) for r in ensemble.metadata.get("history", [])]
        est.n_features_in_ = ensemble.feature_dim
        return est

    def decision_function(self, X):
        """Unbiased score tables, one per example."""
        check_is_fitted(self, "ensemble_")
        return [score_table(self.ensemble_, ex) for ex in X]

    def decode(self, example, scores, nil_bias=None):
        b = self.nil_bias if nil_bias is None else nil_bias
        if example.lattice.K == 0:
            return ()
        return decode(example.lattice, lat.apply_nil_bias(scores, b), self.mode)

    def predict(self, X):
        """Assignments (option-index tuples) after applying ``nil_bias``."""
        X = list(X)
        return [self.decode(ex, s) for ex, s in zip(X, self.decision_function(X))]

    def predict_links(self, X):
        """``{tweet_id: {(start, end, entity), ...}}`` for the non-Nil choices."""
        X = list(X)
        return {ex.id: ex.lattice.links(a) for ex, a in zip(X, self.predict(X))}

    def predict_marginals(self, X):
        X = list(X)
        return [
            lat.marginals(ex.lattice, lat.apply_nil_bias(s, self.nil_bias))
            for ex, s in zip(X, self.decision_function(X))
        ]

    def loss_on(self, X):
        """Mean training objective of the fitted model on labeled examples."""
        X = list(X)
        vals = [loss_value(ex, s, self.loss, self.mode) for ex, s in zip(X, self.decision_function(X))]
        return math.fsum(vals) / len(vals)

    def score(self, X, y=None):
        """IE-driven F1 on labeled examples."""
        from .evaluation import eval_ie

        X = list(X)
        gold = {ex.id: ex.gold_links() for ex in X}
        return eval_ie(self.predict_links(X), gold).f1
