"""Tweets and linking examples: the data the booster trains on."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .exceptions import InvalidGoldError, ShapeError
from .lattice import NIL, MentionLattice, build_lattice
from ._validation import check_gold


@dataclass(frozen=True)
class Tweet:
    id: str
    tokens: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))


@dataclass(frozen=True, eq=False)
class LinkingExample:
    """One tweet with its lattice, per-option feature rows and (optionally) gold.

    ``features[k]`` is an ``(n_options_k, feature_dim)`` array whose row ``u``
    describes option ``u`` of candidate ``k`` (row 0 is Nil). ``gold`` is a
    tuple of option indices, or None at prediction time.
    """

    tweet: Tweet
    lattice: MentionLattice
    features: tuple
    gold: Optional[tuple] = None
    feature_dim: int = field(default=-1)

    def __post_init__(self):
        feats = tuple(np.asarray(f, dtype=np.float64) for f in self.features)
        object.__setattr__(self, "features", feats)
        if len(feats) != self.lattice.K:
            raise ShapeError(
                f"{len(feats)} feature blocks for {self.lattice.K} candidates in tweet {self.tweet.id!r}"
            )
        dim = self.feature_dim
        for k, (cand, block) in enumerate(zip(self.lattice.candidates, feats)):
            if block.ndim != 2 or block.shape[0] != len(cand.options):
                raise ShapeError(
                    f"candidate {k} of tweet {self.tweet.id!r}: expected "
                    f"{len(cand.options)} feature rows, got shape {block.shape}"
                )
            if dim < 0:
                dim = block.shape[1]
            elif block.shape[1] != dim:
                raise ShapeError(f"inconsistent feature_dim within tweet {self.tweet.id!r}")
            if not np.all(np.isfinite(block)):
                raise ValueError(f"non-finite features in tweet {self.tweet.id!r}")
        object.__setattr__(self, "feature_dim", max(dim, 0))
        if self.gold is not None:
            gold = tuple(int(u) for u in self.gold)
            check_gold(self.lattice, gold, self.tweet.id)
            object.__setattr__(self, "gold", gold)

    @property
    def id(self):
        return self.tweet.id

    def feature_matrix(self):
        """All option rows stacked in (candidate, option) order."""
        if not self.features:
            return np.zeros((0, self.feature_dim))
        return np.vstack(self.features)

    def gold_links(self):
        if self.gold is None:
            return set()
        return self.lattice.links(self.gold)

    def with_features(self, features, feature_dim=None):
        return replace(self, features=tuple(features), feature_dim=-1 if feature_dim is None else feature_dim)

    def with_gold(self, gold):
        return replace(self, gold=gold)


def make_example(tweet_id, tokens, candidates, feature_dim=None) -> LinkingExample:
    """Assemble an example from raw candidate records.

    ``candidates`` is a list of ``(start, end, options)`` where ``options`` is a
    list of ``(entity, features, is_gold)``; the Nil option (entity ``NIL``)
    must be present. Candidates are re-sorted by ``(start, end)`` and Nil is
    moved to option index 0, carrying features and gold flags along.

    Gold is kept only when every candidate flags exactly one option; if no
    option anywhere is flagged the example is unlabeled.
    """
    records = []
    for start, end, options in candidates:
        options = list(options)
        entities = [o[0] for o in options]
        if NIL not in entities:
            raise InvalidGoldError(f"candidate ({start}, {end}) of tweet {tweet_id!r} has no Nil option")
        nil_at = entities.index(NIL)
        options = [options[nil_at]] + options[:nil_at] + options[nil_at + 1:]
        records.append((start, end, options))

    lattice = build_lattice((s, e, [o[0] for o in opts]) for s, e, opts in records)
    # build_lattice sorts stably by (start, end); mirror that here
    records.sort(key=lambda r: (r[0], r[1]))

    flags = [[bool(o[2]) for o in opts] for _, _, opts in records]
    any_gold = any(any(f) for f in flags)
    gold = None
    if any_gold:
        gold = []
        for (s, e, _), f in zip(records, flags):
            if sum(f) != 1:
                raise InvalidGoldError(
                    f"candidate ({s}, {e}) of tweet {tweet_id!r} needs exactly one gold option, has {sum(f)}"
                )
            gold.append(f.index(True))
        gold = tuple(gold)

    features = []
    for _, _, opts in records:
        rows = [np.asarray(o[1], dtype=np.float64) for o in opts]
        features.append(np.vstack(rows) if rows else np.zeros((0, 0)))
    return LinkingExample(
        Tweet(str(tweet_id), tuple(tokens)),
        lattice,
        tuple(features),
        gold,
        feature_dim=-1 if feature_dim is None else feature_dim,
    )
