import csv
import io

import numpy as np
import pytest

from smartboost.boosting import SMART
from smartboost.evaluation import (
    MetricsReport,
    QuerySet,
    bias_grid,
    eval_ie,
    eval_ir,
    match_tweet,
    parse_grid,
    tune_bias,
)
from smartboost.exceptions import ConfigError, EmptyDataError, KeyingError

from conftest import random_example


class TestMetrics:
    def test_ratios(self):
        r = MetricsReport(3, 1, 2)
        assert r.precision == 0.75 and r.recall == 0.6
        assert r.f1 == pytest.approx(2 * 0.75 * 0.6 / 1.35)

    def test_zero_denominators(self):
        r = MetricsReport(0, 0, 0)
        assert (r.precision, r.recall, r.f1) == (0.0, 0.0, 0.0)


class TestIE:
    def test_exact(self):
        gold = {"a": {(0, 2, "E1"), (3, 4, "E2")}}
        r = eval_ie(gold, gold)
        assert (r.tp, r.fp, r.fn, r.f1) == (2, 0, 0, 1.0)

    def test_overlap_relaxed(self):
        r = eval_ie({"a": {(0, 2, "E1")}}, {"a": {(1, 3, "E1")}})
        assert (r.tp, r.fp, r.fn) == (1, 0, 0)

    def test_entity_mismatch(self):
        r = eval_ie({"a": {(0, 2, "E1")}}, {"a": {(1, 3, "E2")}})
        assert (r.tp, r.fp, r.fn) == (0, 1, 1)

    def test_adjacent_is_not_overlap(self):
        r = eval_ie({"a": {(0, 2, "E1")}}, {"a": {(2, 3, "E1")}})
        assert (r.tp, r.fp, r.fn) == (0, 1, 1)

    def test_one_to_one(self):
        # two predictions overlapping one gold link: only one may match
        r = match_tweet({(0, 2, "E"), (1, 3, "E")}, {(1, 2, "E")})
        assert (r.tp, r.fp, r.fn) == (1, 1, 0)

    def test_unknown_tweet(self):
        with pytest.raises(KeyingError):
            eval_ie({"zzz": set()}, {"a": set()})

    def test_missing_prediction_is_empty(self):
        r = eval_ie({}, {"a": {(0, 1, "E")}})
        assert (r.tp, r.fp, r.fn) == (0, 0, 1)


class TestIR:
    def test_perfect(self):
        q = [QuerySet("E", (("a", True), ("b", True)))]
        rep = eval_ir({"a": {(0, 1, "E")}, "b": {(2, 3, "E")}}, q)
        assert rep.f1 == 1.0 and rep.per_query["E"].tp == 2

    def test_never_predicted(self):
        q = [QuerySet("E", (("a", True), ("b", False)))]
        rep = eval_ir({"a": set(), "b": {(0, 1, "F")}}, q)
        assert rep.micro.recall == 0.0

    def test_keying(self):
        with pytest.raises(KeyingError):
            eval_ir({}, [QuerySet("E", (("a", True),))])

    def test_schema(self):
        q = [QuerySet("E", (("a", True),)), QuerySet("F", (("a", False),))]
        d = eval_ir({"a": {(0, 1, "E"), (2, 3, "F")}}, q).to_dict()
        assert d["policy"] == "ir" and {"tp", "fp", "fn", "precision", "recall", "f1"} <= d.keys()
        assert [p["query"] for p in d["per_query"]] == ["E", "F"]
        assert "macro" in d


class TestGrid:
    def test_default(self):
        g = bias_grid()
        assert len(g) == 25 and g[0] == -3.0 and g[-1] == 3.0 and 0.0 in g

    def test_single_point(self):
        assert parse_grid("0:0:1") == [0.0]

    @pytest.mark.parametrize("text", ["1:0:1", "0:1:0", "a:b:c", "0:1"])
    def test_bad(self, text):
        with pytest.raises(ConfigError):
            parse_grid(text)


class TestTuneBias:
    @pytest.fixture
    def setup(self, rng):
        corpus = [random_example(rng) for _ in range(40)]
        return SMART(n_trees=5, min_leaf=3).fit(corpus), corpus

    def test_single_point_grid(self, setup):
        model, dev = setup
        sweep = tune_bias(model, dev, [0.0])
        assert sweep.best_bias == 0.0
        assert sweep.best.f1 == pytest.approx(model.set_params(nil_bias=0.0).score(dev))

    def test_best_is_sweep_max(self, setup):
        model, dev = setup
        sweep = tune_bias(model, dev)
        rows = list(csv.DictReader(io.StringIO(sweep.to_csv())))
        assert len(rows) == 25
        top = max(float(r["f1"]) for r in rows)
        assert sweep.best.f1 == top
        winners = [float(r["bias"]) for r in rows if float(r["f1"]) == top]
        assert sweep.best_bias == min(winners, key=lambda b: (abs(b), b))

    def test_constant_f1_picks_zero(self, setup):
        model, dev = setup
        dev_nil = [ex.with_gold(tuple(0 for _ in ex.lattice.candidates)) for ex in dev]
        # no gold links anywhere, so every grid point scores F1 = 0
        sweep = tune_bias(model, dev_nil, [-1.0, 0.0, 1.0])
        assert {r.f1 for _, r in sweep.rows} == {0.0}
        assert sweep.best_bias == 0.0

    def test_link_count_non_increasing(self, setup):
        model, dev = setup
        sweep = tune_bias(model, dev)
        counts = [r.tp + r.fp for _, r in sweep.rows]
        assert all(a >= b for a, b in zip(counts, counts[1:]))

    def test_recall_can_rise_with_bias(self):
        # {B, C} (two wrong links) beats {A} (one right link) only while b is low
        from smartboost.lattice import apply_nil_bias, build_lattice, viterbi
        lat = build_lattice([(0, 2, ["A"]), (0, 1, ["B"]), (1, 2, ["C"])])
        scores = [np.array([0.0, 1.5]), np.array([0.0, 2.0]), np.array([0.0, 1.5])]  # B, A, C
        gold = {"t": {(0, 2, "A")}}
        low = eval_ie({"t": lat.links(viterbi(lat, apply_nil_bias(scores, 0.0))[0])}, gold)
        high = eval_ie({"t": lat.links(viterbi(lat, apply_nil_bias(scores, 1.5))[0])}, gold)
        assert (low.recall, high.recall) == (0.0, 1.0)

    def test_empty_dev(self, setup):
        with pytest.raises(EmptyDataError):
            tune_bias(setup[0], [])

    def test_ir_policy(self, setup):
        model, dev = setup
        ent = dev[0].lattice.candidates[0].options[-1]
        q = [QuerySet(ent, tuple((ex.id, False) for ex in dev[:1]))]
        assert tune_bias(model, dev, [0.0, 1.0], policy="ir", query_sets=q).best_bias in (0.0, 1.0)
