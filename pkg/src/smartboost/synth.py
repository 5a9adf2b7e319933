"""Synthetic linking corpora with a planted non-linear scorer.

Each tweet gets a latent topic. Candidate entities are drawn either from the
tweet's topic or from elsewhere, and every entity option carries latent
features. The planted score of an entity option is an XOR-of-thresholds (or
threshold-product) function of those features plus a bonus for being on
topic; Nil scores 0. Gold is the best valid assignment under the planted
scores. Entities of one topic are linked from a shared pool of pages, so
link-graph Jaccard features reveal the topic bonus that the observed
features hide.

Feature column 0 is the Nil indicator; columns 1.. are latent values plus
Gaussian noise (entity rows) or zeros (Nil rows).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .corpus import make_example
from .evaluation import QuerySet
from .exceptions import ConfigError
from .lattice import NIL, build_lattice, viterbi
from .linking import LinkGraph

NONLINEARITIES = ("xor", "threshold-product")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    num_tweets: int = 714
    tokens_per_tweet: int = 14
    candidate_density: float = 0.5
    entities_per_candidate: int = 3
    feature_dim: int = 8
    overlap_rate: float = 0.5
    nonlinearity: str = "xor"
    noise: float = 0.3
    n_topics: int = 8
    entities_per_topic: int = 30
    topic_bonus: float = 1.5
    on_topic_rate: float = 0.5
    pages_per_topic: int = 60
    pages_per_entity: int = 10

    def __post_init__(self):
        for name in ("num_tweets", "tokens_per_tweet", "entities_per_candidate", "n_topics",
                     "entities_per_topic", "pages_per_topic", "pages_per_entity"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("candidate_density", "overlap_rate", "on_topic_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.noise < 0:
            raise ConfigError("noise must be >= 0")
        if self.nonlinearity not in NONLINEARITIES:
            raise ConfigError(f"nonlinearity must be one of {NONLINEARITIES}")
        if self.feature_dim < 6:
            raise ConfigError("feature_dim must be >= 6 (Nil flag + 5 latent columns)")
        if self.num_tweets < 3:
            raise ConfigError("num_tweets must be >= 3 to fill train/dev/test")

    def to_dict(self):
        return asdict(self)


@dataclass
class SynthData:
    train: list
    dev: list
    test: list
    link_graph: LinkGraph
    planted: dict  # tweet id -> planted score table
    queries: list  # QuerySet over the test split

    @property
    def all_examples(self):
        return self.train + self.dev + self.test


def planted_score(z, cfg: SynthConfig, on_topic: bool) -> float:
    """Ground-truth score of one entity option from its latent vector."""
    if cfg.nonlinearity == "xor":
        a = 1.0 if (z[0] > 0) != (z[1] > 0) else -1.0
        b = 1.0 if (z[2] > 0) != (z[3] > 0) else -1.0
        s = 1.5 * a + 1.0 * b
    else:
        a = 1.0 if (z[0] > 0 and z[1] > 0) else -1.0
        b = 1.0 if z[2] > 0 else -1.0
        s = 1.5 * a * b + 1.0 * (1.0 if z[3] > 0.5 else -1.0)
    s += 0.3 * z[4]
    s += cfg.topic_bonus * ((1.0 if on_topic else 0.0) - 0.5)
    return float(s)


def _entity_id(topic, j):
    return f"E{topic:02d}_{j:03d}"


def _place_spans(rng, cfg):
    T = cfg.tokens_per_tweet
    n = max(1, int(rng.binomial(T, cfg.candidate_density)))
    spans = []
    for _ in range(n):
        length = int(rng.integers(1, min(3, T) + 1))
        if spans and rng.random() < cfg.overlap_rate:
            s0, e0 = spans[int(rng.integers(len(spans)))]
            lo, hi = max(0, s0 - length + 1), min(e0 - 1, T - length)
            options = [s for s in range(lo, hi + 1) if (s, s + length) not in spans]
            if not options:
                continue
            start = options[int(rng.integers(len(options)))]
        else:
            covered = np.zeros(T, dtype=bool)
            for s, e in spans:
                covered[s:e] = True
            starts = [s for s in range(T - length + 1) if not covered[s:s + length].any()]
            if not starts:
                continue
            start = starts[int(rng.integers(len(starts)))]
        spans.append((start, start + length))
    return spans


def generate(config: SynthConfig = SynthConfig()) -> SynthData:
    """Deterministically sample train/dev/test corpora and a link graph."""
    cfg = config
    rng = np.random.default_rng(cfg.seed)
    latent_dim = cfg.feature_dim - 1

    # link graph: each topic owns a page pool; entities draw most pages from it
    pairs = []
    for t in range(cfg.n_topics):
        pool = [f"P{t:02d}_{i:03d}" for i in range(cfg.pages_per_topic)]
        for j in range(cfg.entities_per_topic):
            k_topic = min(cfg.pages_per_entity, len(pool))
            for p in rng.choice(len(pool), size=k_topic, replace=False):
                pairs.append((_entity_id(t, j), pool[int(p)]))
            stray = int(rng.integers(cfg.n_topics * cfg.pages_per_topic))
            pairs.append((_entity_id(t, j), f"P{stray // cfg.pages_per_topic:02d}_{stray % cfg.pages_per_topic:03d}"))
    graph = LinkGraph.from_pairs(pairs)

    examples, planted = [], {}
    width = len(str(cfg.num_tweets - 1))
    for n in range(cfg.num_tweets):
        tid = f"t{n:0{width}d}"
        topic = int(rng.integers(cfg.n_topics))
        tokens = [f"w{int(v)}" for v in rng.integers(0, 5000, size=cfg.tokens_per_tweet)]
        raw, scores = [], []
        for start, end in _place_spans(rng, cfg):
            n_ent = int(rng.integers(1, cfg.entities_per_candidate + 1))
            entities, flags = [], []
            while len(entities) < n_ent:
                on_topic = rng.random() < cfg.on_topic_rate
                t = topic if on_topic else int(rng.integers(cfg.n_topics))
                e = _entity_id(t, int(rng.integers(cfg.entities_per_topic)))
                if e not in entities:
                    entities.append(e)
                    flags.append(t == topic)
            rows = [np.zeros(cfg.feature_dim)]
            rows[0][0] = 1.0
            row_scores = [0.0]
            for on_topic in flags:
                z = rng.normal(size=latent_dim)
                row_scores.append(planted_score(z, cfg, on_topic))
                obs = z + cfg.noise * rng.normal(size=latent_dim) if cfg.noise else z
                rows.append(np.concatenate([[0.0], obs]))
            raw.append((start, end, [NIL] + entities, rows))
            scores.append(np.array(row_scores))

        # gold is the planted-score optimum; lattice order == sorted (start, end)
        order = sorted(range(len(raw)), key=lambda i: (raw[i][0], raw[i][1]))
        raw = [raw[i] for i in order]
        scores = [scores[i] for i in order]
        lattice = build_lattice((s, e, opts) for s, e, opts, _ in raw)
        gold, _ = viterbi(lattice, scores)
        records = [
            (s, e, [(o, r, u == g) for u, (o, r) in enumerate(zip(opts, rows))])
            for (s, e, opts, rows), g in zip(raw, gold)
        ]
        ex = make_example(tid, tokens, records, feature_dim=cfg.feature_dim)
        if ex.gold is None:  # no candidates at all
            ex = ex.with_gold(())
        examples.append(ex)
        planted[tid] = scores

    n_train = int(round(0.7 * cfg.num_tweets))
    n_dev = int(round(0.15 * cfg.num_tweets))
    train, dev, test = examples[:n_train], examples[n_train:n_train + n_dev], examples[n_train + n_dev:]
    return SynthData(train, dev, test, graph, planted, make_queries(test))


def make_queries(examples, max_queries=10, min_tweets=3):
    """IR query sets: frequent candidate entities and the tweets mentioning them."""
    seen = {}
    for ex in examples:
        gold = ex.gold_links()
        gold_entities = {link[2] for link in gold}
        for e in sorted({e for c in ex.lattice.candidates for e in c.entities}):
            seen.setdefault(e, []).append((ex.id, e in gold_entities))
    ranked = sorted(seen.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    return [QuerySet(e, tuple(j)) for e, j in ranked[:max_queries] if len(j) >= min_tweets]
