import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smartboost.boosting import SMART, BoostConfig
from smartboost.corpus import Tweet
from smartboost.exceptions import ConfigError, MissingLexiconEntryError
from smartboost.lattice import NIL, MentionSpan, viterbi
from smartboost.linking import (
    BASIC_FEATURE_NAMES,
    Lexicon,
    LinkGraph,
    TwoStageSMART,
    apply_nil_bias,
    basic_features,
    entity_entity_features,
    featurize,
    generate_candidates,
    jaccard,
    two_stage_train,
)
from smartboost.trees import TreeConfig

from conftest import random_example


@pytest.fixture
def lexicon():
    lex = Lexicon()
    lex.add("new york", "E_NY", 0.9, 99)
    lex.add("york", "E_Y", 0.2, 4)
    lex.add("giants", "E_G", 0.5, 10)
    lex.add("giants", "E_G2", 0.1, 2)
    return lex


class TestCandidates:
    def test_empty_lexicon(self):
        assert generate_candidates(Tweet("1", ["hello"]), Lexicon()) == []

    def test_new_york(self, lexicon):
        got = generate_candidates(Tweet("1", ["new", "york"]), lexicon)
        assert got == [(MentionSpan(0, 2), ["E_NY"]), (MentionSpan(1, 2), ["E_Y"])]
        assert got[0][0].overlaps(got[1][0])

    def test_repeated_ngram(self, lexicon):
        got = generate_candidates(Tweet("1", ["Giants", "and", "giants"]), lexicon)
        assert [c[0] for c in got] == [MentionSpan(0, 1), MentionSpan(2, 3)]

    def test_max_ngram(self, lexicon):
        assert generate_candidates(Tweet("1", ["new", "york"]), lexicon, max_ngram=1) == [
            (MentionSpan(1, 2), ["E_Y"])]
        with pytest.raises(ConfigError):
            generate_candidates(Tweet("1", ["a"]), lexicon, max_ngram=0)

    def test_sorted_and_matching(self, lexicon):
        tokens = ["York", "new", "YORK", "giants", "new", "york", "giants"]
        got = generate_candidates(Tweet("1", tokens), lexicon)
        assert [c[0] for c in got] == sorted(c[0] for c in got)
        for span, _ in got:
            assert " ".join(tokens[span.start:span.end]).lower() in lexicon


class TestBasicFeatures:
    def test_nil(self, lexicon):
        t = Tweet("1", ["New", "York"])
        f = dict(zip(BASIC_FEATURE_NAMES, basic_features(t, MentionSpan(0, 2), NIL, lexicon)))
        assert f["is_nil"] == 1.0 and f["anchor_prob"] == 0.0 and f["log1p_count"] == 0.0
        assert f["span_tokens"] == 2.0 and f["capitalization_ratio"] == 1.0

    def test_entity_stats(self, lexicon):
        f = basic_features(Tweet("1", ["new", "york"]), MentionSpan(0, 2), "E_NY", lexicon)
        assert f[0] == 0.9 and f[1] == pytest.approx(math.log(100))
        assert f[3] == 0.0  # all lowercase

    def test_extra_passthrough(self, lexicon):
        f = basic_features(Tweet("1", ["giants"]), MentionSpan(0, 1), "E_G", lexicon, extra=[7.0])
        assert f[4] == 2.0 and f[-1] == 7.0 and len(f) == len(BASIC_FEATURE_NAMES) + 1

    def test_unknown_entity(self, lexicon):
        with pytest.raises(MissingLexiconEntryError):
            basic_features(Tweet("1", ["york"]), MentionSpan(0, 1), "E_NY", lexicon)

    def test_featurize(self, lexicon):
        ex = featurize(Tweet("1", ["new", "york", "giants"]), lexicon, gold_links={(0, 2, "E_NY")})
        assert ex.lattice.K == 3
        assert ex.gold == (1, 0, 0)
        assert ex.feature_dim == len(BASIC_FEATURE_NAMES)


class TestJaccard:
    graph = LinkGraph({"a": {"p1", "p2"}, "b": {"p2", "p3"}, "c": {"p1", "p2"}})

    def test_basic(self):
        assert jaccard("a", {"a", "b"}, self.graph) == pytest.approx(1 / 3)

    def test_self_only(self):
        assert jaccard("a", {"a"}, self.graph) == 0.0

    def test_identical(self):
        assert jaccard("a", {"c"}, self.graph) == 1.0

    def test_missing_entries(self):
        assert jaccard("zzz", {"yyy"}, self.graph) == 0.0

    @settings(max_examples=100, deadline=None)
    @given(st.sets(st.integers(0, 20)), st.sets(st.integers(0, 20)), st.integers(100, 120))
    def test_bounded_and_monotone(self, own, other, shared):
        g = LinkGraph({"e": own, "f": other})
        j = jaccard("e", {"f"}, g)
        assert 0.0 <= j <= 1.0
        g2 = LinkGraph({"e": own | {shared}, "f": other | {shared}})
        assert jaccard("e", {"f"}, g2) >= j


class TestEntityEntityFeatures:
    def _example(self):
        from smartboost.corpus import make_example
        raw = [
            (0, 1, [(NIL, [1.0], True), ("x", [0.0], False)]),
            (2, 3, [(NIL, [1.0], True), ("a", [0.0], False), ("b", [0.0], False), ("c", [0.0], False)]),
        ]
        return make_example("t", ["u", "v", "w", "z"], raw)

    def test_flags(self):
        g = LinkGraph({"x": {1, 2, 3, 4, 5}, "a": {1, 2}, "b": {1}, "c": {9}})
        ex = entity_entity_features(self._example(), (1, 0), g)
        block = ex.features[1]
        np.testing.assert_allclose(block[:, 1], [0, 0.4, 0.2, 0.0])
        np.testing.assert_array_equal(block[:, 2], [0, 1, 0, 0])
        assert ex.feature_dim == 3 and ex.lattice.K == 2

    def test_all_zero(self):
        ex = entity_entity_features(self._example(), (0, 0), LinkGraph())
        for block in ex.features:
            np.testing.assert_array_equal(block[:, 1:], 0.0)

    def test_ties(self):
        g = LinkGraph({"x": {1, 2, 3}, "a": {1, 9}, "b": {2, 8}})
        block = entity_entity_features(self._example(), (1, 0), g).features[1]
        np.testing.assert_allclose(block[1:3, 1], [0.25, 0.25])
        np.testing.assert_array_equal(block[:, 2], [0, 1, 1, 0])

    def test_shape_unchanged(self, rng):
        ex = random_example(rng)
        out = entity_entity_features(ex, ex.gold, LinkGraph())
        assert out.lattice is ex.lattice and out.gold == ex.gold
        assert [b.shape[0] for b in out.features] == [b.shape[0] for b in ex.features]
        assert out.feature_dim == ex.feature_dim + 2


class TestNilBiasMonotone:
    def test_link_count_non_increasing(self, rng):
        from conftest import random_lattice, random_scores
        for _ in range(50):
            lat = random_lattice(rng, min_k=1)
            s = random_scores(rng, lat)
            counts = [sum(1 for u in viterbi(lat, apply_nil_bias(s, b))[0] if u)
                      for b in np.arange(-3, 3.01, 0.25)]
            assert all(x >= y for x, y in zip(counts, counts[1:]))


class TestTwoStage:
    def test_shapes_and_empty_graph(self, rng):
        corpus = [random_example(rng) for _ in range(30)]
        cfg = BoostConfig(n_trees=3, tree=TreeConfig(min_leaf=3))
        s1, s2 = two_stage_train(corpus, cfg, LinkGraph())
        assert s2.feature_dim == s1.feature_dim + 2
        # zero columns can never be split on
        for tree in s2.trees:
            assert not np.any(tree.feature >= s1.feature_dim)

    def test_requires_graph(self, rng):
        with pytest.raises(ConfigError):
            TwoStageSMART(SMART(n_trees=1)).fit([random_example(rng)])

    def test_predict_valid(self, rng):
        corpus = [random_example(rng) for _ in range(30)]
        graph = LinkGraph({e: {sum(map(ord, e)) % 7} for ex in corpus for c in ex.lattice.candidates for e in c.entities})
        model = TwoStageSMART(SMART(n_trees=3, min_leaf=3), graph).fit(corpus)
        for ex, a in zip(corpus, model.predict(corpus)):
            assert ex.lattice.is_valid(a)
        assert model.stage1_.nil_bias == 0.0
