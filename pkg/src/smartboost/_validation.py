"""Input validation helpers shared by the estimators."""

import numpy as np

from .exceptions import EmptyDataError, InvalidGoldError, ShapeError


def check_matrix(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"expected a 2-D feature matrix, got {X.ndim}-D")
    if not np.all(np.isfinite(X)):
        raise ValueError("feature matrix contains non-finite values")
    return X


def check_corpus(examples, require_gold=True, feature_dim=None):
    """Validate a list of LinkingExample and return its common feature_dim."""
    examples = list(examples)
    if not examples:
        raise EmptyDataError("corpus is empty")
    dims = {ex.feature_dim for ex in examples if ex.lattice.K}
    if feature_dim is not None:
        dims.add(feature_dim)
    if len(dims) > 1:
        raise ShapeError(f"inconsistent feature dimensions in corpus: {sorted(dims)}")
    if require_gold:
        for ex in examples:
            if ex.gold is None:
                raise InvalidGoldError(f"tweet {ex.tweet.id!r} has no gold assignment")
            check_gold(ex.lattice, ex.gold, ex.tweet.id)
    if dims:
        return dims.pop()
    # every tweet is candidate-free; fall back to whatever the examples carry
    return examples[0].feature_dim


def check_gold(lattice, gold, tweet_id=None):
    if len(gold) != lattice.K:
        raise ShapeError(f"gold of length {len(gold)} for {lattice.K} candidates")
    for k, (cand, u) in enumerate(zip(lattice.candidates, gold)):
        if not 0 <= u < len(cand.options):
            raise InvalidGoldError(f"gold option {u} out of range for candidate {k}")
    if not lattice.is_valid(gold):
        raise InvalidGoldError(f"gold assignment of tweet {tweet_id!r} links overlapping candidates")
