"""Entity-linking pipeline: candidates, features, entity-entity features.

The main training path reads corpora that already carry feature vectors
(see :mod:`smartboost.io`). :func:`featurize` is the self-contained
fallback that derives a small feature set from a lexicon alone.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, clone
from sklearn.utils.validation import check_is_fitted

from .boosting import SMART
from .corpus import LinkingExample, Tweet, make_example
from .exceptions import ConfigError, MissingLexiconEntryError
from .lattice import NIL, MentionSpan, apply_nil_bias  # noqa: F401  (re-exported)

DEFAULT_MAX_NGRAM = 6

BASIC_FEATURE_NAMES = (
    "anchor_prob",
    "log1p_count",
    "span_tokens",
    "capitalization_ratio",
    "surface_entity_count",
    "is_nil",
)


@dataclass(frozen=True)
class LexiconEntry:
    entity: str
    anchor_prob: float
    count: int


class Lexicon:
    """Lowercased surface form -> candidate entities with link statistics."""

    def __init__(self, entries=None):
        self._entries = {}
        for surface, items in (entries or {}).items():
            for item in items:
                self.add(surface, *(item if not isinstance(item, LexiconEntry) else
                                    (item.entity, item.anchor_prob, item.count)))

    def add(self, surface, entity, anchor_prob, count):
        if not 0.0 <= anchor_prob <= 1.0:
            raise ValueError(f"anchor_prob must lie in [0, 1], got {anchor_prob} for {surface!r}")
        if count < 0:
            raise ValueError(f"count must be >= 0, got {count} for {surface!r}")
        bucket = self._entries.setdefault(surface.lower(), {})
        if entity in bucket:
            raise ValueError(f"duplicate entity {entity!r} for surface {surface!r}")
        bucket[entity] = LexiconEntry(entity, float(anchor_prob), int(count))

    def __contains__(self, surface):
        return surface.lower() in self._entries

    def __len__(self):
        return len(self._entries)

    def entities(self, surface):
        return list(self._entries.get(surface.lower(), {}))

    def entry(self, surface, entity):
        try:
            return self._entries[surface.lower()][entity]
        except KeyError:
            raise MissingLexiconEntryError(f"no lexicon entry for ({surface!r}, {entity!r})") from None

    def items(self):
        for surface, bucket in self._entries.items():
            for e in bucket.values():
                yield surface, e


class LinkGraph:
    """Entity -> set of pages that link to it."""

    def __init__(self, edges=None):
        self._pages = defaultdict(set)
        for entity, pages in (edges or {}).items():
            self._pages[entity].update(pages)

    @classmethod
    def from_pairs(cls, pairs):
        g = cls()
        for entity, page in pairs:
            g._pages[entity].add(page)
        return g

    def pages(self, entity):
        return self._pages.get(entity, set())

    def pairs(self):
        for entity in sorted(self._pages):
            for page in sorted(self._pages[entity]):
                yield entity, page

    def __len__(self):
        return len(self._pages)


def generate_candidates(tweet: Tweet, lexicon: Lexicon, max_ngram=DEFAULT_MAX_NGRAM):
    """All n-grams (n <= max_ngram) whose lowercased text is a lexicon surface.

    Returns ``[(MentionSpan, [entity, ...]), ...]`` sorted by ``(start, end)``.
    """
    if max_ngram < 1:
        raise ConfigError(f"max_ngram must be >= 1, got {max_ngram}")
    tokens = [t.lower() for t in tweet.tokens]
    out = []
    for start in range(len(tokens)):
        for end in range(start + 1, min(start + max_ngram, len(tokens)) + 1):
            surface = " ".join(tokens[start:end])
            if surface in lexicon:
                out.append((MentionSpan(start, end), lexicon.entities(surface)))
    return out


def _capitalization_ratio(tokens):
    if not tokens:
        return 0.0
    return sum(1 for t in tokens if t[:1].isupper()) / len(tokens)


def basic_features(tweet: Tweet, span: MentionSpan, entity, lexicon: Lexicon, extra=()):
    """Lexicon-only feature vector for one (candidate, option) pair.

    Columns follow ``BASIC_FEATURE_NAMES`` and are followed by ``extra``.
    Entity statistics are zero for Nil; mention-level columns are shared.
    """
    tokens = tweet.tokens[span.start:span.end]
    surface = " ".join(tokens).lower()
    n_entities = len(lexicon.entities(surface))
    if entity == NIL:
        anchor, log_count, is_nil = 0.0, 0.0, 1.0
    else:
        e = lexicon.entry(surface, entity)
        anchor, log_count, is_nil = e.anchor_prob, math.log1p(e.count), 0.0
    head = [anchor, log_count, float(len(tokens)), _capitalization_ratio(tokens), float(n_entities), is_nil]
    return np.asarray(head + [float(v) for v in extra])


def featurize(tweet: Tweet, lexicon: Lexicon, gold_links=None, max_ngram=DEFAULT_MAX_NGRAM):
    """Build a LinkingExample from raw tokens using :func:`basic_features`.

    ``gold_links`` is an optional set of ``(start, end, entity)``; a candidate
    is labeled with the entity whose triple appears there and Nil otherwise.
    """
    raw = []
    gold_links = set(gold_links) if gold_links is not None else None
    for span, entities in generate_candidates(tweet, lexicon, max_ngram):
        options = []
        for entity in [NIL] + entities:
            is_gold = False
            if gold_links is not None:
                if entity == NIL:
                    is_gold = not any((span.start, span.end, e) in gold_links for e in entities)
                else:
                    is_gold = (span.start, span.end, entity) in gold_links
            options.append((entity, basic_features(tweet, span, entity, lexicon), is_gold))
        raw.append((span.start, span.end, options))
    return make_example(tweet.id, tweet.tokens, raw, feature_dim=len(BASIC_FEATURE_NAMES))


# Entity-entity features -------------------------------------------------


def jaccard(entity, first_stage_entities, graph: LinkGraph) -> float:
    """Overlap between pages linking to ``entity`` and to the other first-stage entities."""
    own = graph.pages(entity)
    others = set()
    for e in first_stage_entities:
        if e != entity:
            others |= graph.pages(e)
    union = own | others
    if not union:
        return 0.0
    return len(own & others) / len(union)


def entity_entity_features(example: LinkingExample, first_stage_prediction, graph: LinkGraph):
    """Append ``[jaccard, is_max_jaccard]`` columns to every option row.

    Nil rows get ``[0, 0]``. The flag is 1 for every entity of a candidate
    that attains the candidate's maximum Jaccard value, provided that
    maximum is positive.
    """
    lattice = example.lattice
    chosen = {lattice.candidates[k].options[u] for k, u in enumerate(first_stage_prediction) if u != 0}
    blocks = []
    for cand, block in zip(lattice.candidates, example.features):
        extra = np.zeros((len(cand.options), 2))
        jac = np.array([jaccard(e, chosen, graph) for e in cand.entities])
        if jac.size:
            extra[1:, 0] = jac
            top = jac.max()
            if top > 0:
                extra[1:, 1] = (jac == top).astype(float)
        blocks.append(np.hstack([block, extra]))
    return example.with_features(blocks, feature_dim=example.feature_dim + 2)


class TwoStageSMART(BaseEstimator):
    """Two-stage linker that adds link-graph coherence features.

    The first stage is fit on the base features. Its Viterbi output (Nil bias
    0) on each tweet supplies the "identified entities" used to compute
    Jaccard features, and the second stage is refit on the widened rows.
    Prediction follows the same path.

    Parameters
    ----------
    estimator : SMART, default=None
        Template for both stages (cloned); ``SMART()`` when None.
    link_graph : LinkGraph
    nil_bias : float, default=0.0
        Applied to the second-stage scores only.
    """

    def __init__(self, estimator=None, link_graph=None, nil_bias=0.0):
        self.estimator = estimator
        self.link_graph = link_graph
        self.nil_bias = nil_bias

    def _template(self):
        return clone(self.estimator if self.estimator is not None else SMART()).set_params(nil_bias=0.0)

    def _augment(self, X):
        first = self.stage1_.predict(X)
        return [entity_entity_features(ex, a, self.link_graph) for ex, a in zip(X, first)]

    def fit(self, X, y=None):
        if self.link_graph is None:
            raise ConfigError("TwoStageSMART needs a link_graph")
        X = list(X)
        if y is not None:
            X = [ex.with_gold(g) for ex, g in zip(X, y)]
        self.stage1_ = self._template().fit(X)
        self.stage2_ = self._template().fit(self._augment(X))
        self.n_features_in_ = self.stage1_.n_features_in_
        return self

    @property
    def mode(self):
        return self.stage2_.mode

    def transform(self, X):
        """Examples widened with the entity-entity columns."""
        check_is_fitted(self, "stage2_")
        return self._augment(list(X))

    def decision_function(self, X):
        check_is_fitted(self, "stage2_")
        return self.stage2_.decision_function(self._augment(list(X)))

    def decode(self, example, scores, nil_bias=None):
        b = self.nil_bias if nil_bias is None else nil_bias
        return self.stage2_.decode(example, scores, b)

    def predict(self, X):
        X = list(X)
        return [self.decode(ex, s) for ex, s in zip(X, self.decision_function(X))]

    def predict_links(self, X):
        X = list(X)
        return {ex.id: ex.lattice.links(a) for ex, a in zip(X, self.predict(X))}

    def score(self, X, y=None):
        from .evaluation import eval_ie

        X = list(X)
        return eval_ie(self.predict_links(X), {ex.id: ex.gold_links() for ex in X}).f1


def two_stage_train(corpus, config, graph):
    """Functional form of :class:`TwoStageSMART`; returns the two ensembles."""
    est = TwoStageSMART(
        SMART(config.n_trees, config.learning_rate, config.tree.min_leaf,
              config.tree.max_depth, config.loss, config.mode),
        graph,
    ).fit(corpus)
    return est.stage1_.ensemble_, est.stage2_.ensemble_
