"""IE- and IR-driven precision/recall/F1 and Nil-bias tuning."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import ConfigError, EmptyDataError, KeyingError


@dataclass(frozen=True)
class MetricsReport:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self):
        return self.tp / (self.tp + self.fp) if self.tp + self.fp else 0.0

    @property
    def recall(self):
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else 0.0

    @property
    def f1(self):
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r else 0.0

    def __add__(self, other):
        return MetricsReport(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    def to_dict(self):
        d = asdict(self)
        d.update(precision=self.precision, recall=self.recall, f1=self.f1)
        return d


def _overlaps(a, b):
    return a[0] < b[1] and b[0] < a[1]


def match_tweet(predicted, gold):
    """Greedy one-to-one matching of ``(start, end, entity)`` links.

    Predictions are visited in ``(start, end, entity)`` order; each takes the
    first still-unmatched gold link (same order) that overlaps it and names
    the same entity.
    """
    golds = sorted(gold)
    used = [False] * len(golds)
    tp = 0
    for p in sorted(predicted):
        for i, g in enumerate(golds):
            if not used[i] and p[2] == g[2] and _overlaps(p, g):
                used[i] = True
                tp += 1
                break
    return MetricsReport(tp, len(predicted) - tp, len(golds) - tp)


def eval_ie(predictions, golds) -> MetricsReport:
    """Micro-averaged link P/R/F1 with overlap-relaxed mention boundaries.

    Both arguments map tweet id -> iterable of ``(start, end, entity)``.
    Gold tweets without a prediction entry count as empty predictions.
    """
    unknown = set(predictions) - set(golds)
    if unknown:
        raise KeyingError(f"predictions for unknown tweet ids: {sorted(unknown)[:5]}")
    total = MetricsReport(0, 0, 0)
    for tid, gold in golds.items():
        total += match_tweet(set(predictions.get(tid, ())), set(gold))
    return total


@dataclass(frozen=True)
class QuerySet:
    entity: str
    judgments: tuple  # (tweet_id, relevant)


@dataclass
class IRReport:
    micro: MetricsReport
    per_query: dict

    @property
    def macro_f1(self):
        if not self.per_query:
            return 0.0
        return float(np.mean([r.f1 for r in self.per_query.values()]))

    @property
    def f1(self):
        return self.micro.f1

    def to_dict(self):
        d = {"policy": "ir", **self.micro.to_dict()}
        d["macro"] = {
            "precision": float(np.mean([r.precision for r in self.per_query.values()])) if self.per_query else 0.0,
            "recall": float(np.mean([r.recall for r in self.per_query.values()])) if self.per_query else 0.0,
            "f1": self.macro_f1,
        }
        d["per_query"] = [{"query": q, **r.to_dict()} for q, r in self.per_query.items()]
        return d


def eval_ir(predictions, query_sets) -> IRReport:
    """Per-query relevance P/R/F1 over tweets, plus the micro aggregate.

    A tweet is predicted relevant to a query when the query entity appears
    among its predicted links. ``predictions`` maps tweet id -> links; every
    judged tweet must have an entry.
    """
    per_query = {}
    for qs in query_sets:
        tp = fp = fn = 0
        for tid, relevant in qs.judgments:
            if tid not in predictions:
                raise KeyingError(f"no prediction for tweet {tid!r} judged for query {qs.entity!r}")
            hit = any(link[2] == qs.entity for link in predictions[tid])
            tp += hit and relevant
            fp += hit and not relevant
            fn += relevant and not hit
        report = MetricsReport(int(tp), int(fp), int(fn))
        per_query[qs.entity] = per_query[qs.entity] + report if qs.entity in per_query else report
    micro = sum(per_query.values(), MetricsReport(0, 0, 0))
    return IRReport(micro, per_query)


def bias_grid(lo=-3.0, hi=3.0, step=0.25):
    if step <= 0 or lo > hi:
        raise ConfigError(f"bad grid {lo}:{hi}:{step}; need lo <= hi and step > 0")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return [round(lo + i * step, 10) for i in range(n)]


def parse_grid(text):
    try:
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"grid must look like LO:HI:STEP, got {text!r}") from None
    return bias_grid(lo, hi, step)


@dataclass
class BiasSweep:
    best_bias: float
    best: object
    rows: list  # (bias, report)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bias", "tp", "fp", "fn", "precision", "recall", "f1"])
        for b, r in self.rows:
            m = r.micro if isinstance(r, IRReport) else r
            w.writerow([repr(b), m.tp, m.fp, m.fn, repr(m.precision), repr(m.recall), repr(m.f1)])
        return buf.getvalue()


def tune_bias(model, dev, grid=None, policy="ie", query_sets=None) -> BiasSweep:
    """Pick the Nil bias maximizing dev F1.

    ``model`` is a fitted SMART or TwoStageSMART. Scores are computed once
    and each grid point only re-decodes. Ties prefer the smallest ``|b|``,
    then the smaller ``b``.
    """
    dev = list(dev)
    if not dev:
        raise EmptyDataError("dev corpus is empty")
    if grid is None:
        grid = bias_grid()
    grid = list(grid)
    if not grid:
        raise ConfigError("empty bias grid")
    if policy not in ("ie", "ir"):
        raise ConfigError(f"unknown policy {policy!r}")
    if policy == "ir" and query_sets is None:
        raise ConfigError("IR tuning needs query sets")

    scores = model.decision_function(dev)
    gold = {ex.id: ex.gold_links() for ex in dev}
    rows = []
    for b in grid:
        preds = {ex.id: ex.lattice.links(model.decode(ex, s, b)) for ex, s in zip(dev, scores)}
        report = eval_ie(preds, gold) if policy == "ie" else eval_ir(preds, query_sets)
        rows.append((b, report))
    best_bias, best = min(rows, key=lambda r: (-r[1].f1, abs(r[0]), r[0]))
    return BiasSweep(best_bias, best, rows)
