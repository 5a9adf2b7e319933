"""Readers and writers for corpora, lexicons, link graphs, predictions and models.

Formats (UTF-8, LF line endings):

* corpus JSONL, one tweet per line::

    {"id": str, "tokens": [str],
     "candidates": [{"start": int, "end": int,
                     "options": [{"entity": str | "NIL", "features": [float], "gold": bool}]}]}

* predictions / gold links JSONL: ``{"id": str, "links": [{"start", "end", "entity"}]}``
* lexicon TSV: ``surface  entity  anchor_prob  count``
* link-graph TSV: ``entity  page_id``
* IR query TSV: ``query_entity  tweet_id  relevant(0|1)``
* model: versioned JSON document (see :func:`save_model`)
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .boosting import SMART, Ensemble
from .corpus import Tweet, make_example
from .evaluation import QuerySet
from .exceptions import ModelFormatError, ShapeError
from .lattice import NIL
from .linking import Lexicon, LinkGraph, TwoStageSMART

MODEL_FORMAT = "smartboost-model"
MODEL_VERSION = 1


def atomic_write(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonl_lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as err:
                    raise ValueError(f"{path}:{lineno}: invalid JSON ({err.msg})") from None


def _dumps(obj):
    return json.dumps(obj, ensure_ascii=False)


# Corpus -----------------------------------------------------------------


def example_from_dict(d):
    raw = []
    for c in d.get("candidates", []):
        options = []
        for o in c["options"]:
            options.append((o["entity"], [float(v) for v in o["features"]], bool(o.get("gold", False))))
        widths = {len(o[1]) for o in options}
        if len(widths) > 1:
            raise ShapeError(f"tweet {d['id']!r}: options of one candidate have different feature lengths")
        raw.append((int(c["start"]), int(c["end"]), options))
    return make_example(str(d["id"]), d.get("tokens", []), raw)


def example_to_dict(ex):
    cands = []
    for k, (cand, block) in enumerate(zip(ex.lattice.candidates, ex.features)):
        opts = []
        for u, (entity, row) in enumerate(zip(cand.options, block)):
            o = {"entity": entity, "features": [float(v) for v in row]}
            if ex.gold is not None:
                o["gold"] = ex.gold[k] == u
            opts.append(o)
        cands.append({"start": cand.span.start, "end": cand.span.end, "options": opts})
    return {"id": ex.id, "tokens": list(ex.tweet.tokens), "candidates": cands}


def read_corpus(path):
    out = []
    for lineno, d in _jsonl_lines(path):
        try:
            out.append(example_from_dict(d))
        except (KeyError, TypeError) as err:
            raise ValueError(f"{path}:{lineno}: malformed corpus record ({err})") from None
        except ValueError as err:
            raise type(err)(f"{path}:{lineno}: {err}") from None
    return out


def write_corpus(examples, path):
    atomic_write(path, "".join(_dumps(example_to_dict(ex)) + "\n" for ex in examples))


def read_tweets(path):
    """Raw tweets for featurization: ``{"id", "tokens", "links"?}`` per line."""
    out = []
    for _, d in _jsonl_lines(path):
        links = d.get("links")
        gold = None if links is None else {(int(l["start"]), int(l["end"]), l["entity"]) for l in links}
        out.append((Tweet(str(d["id"]), d["tokens"]), gold))
    return out


# Links ------------------------------------------------------------------


def links_to_dict(tweet_id, links):
    return {
        "id": tweet_id,
        "links": [{"start": s, "end": e, "entity": ent} for s, e, ent in sorted(links)],
    }


def write_links(links_by_id, path, order=None):
    ids = order if order is not None else sorted(links_by_id)
    atomic_write(path, "".join(_dumps(links_to_dict(t, links_by_id[t])) + "\n" for t in ids))


def read_links(path):
    """Tweet id -> set of links, from a predictions file or a labeled corpus."""
    out = {}
    for lineno, d in _jsonl_lines(path):
        tid = str(d["id"])
        if tid in out:
            raise ValueError(f"{path}:{lineno}: duplicate tweet id {tid!r}")
        if "candidates" in d:
            out[tid] = example_from_dict(d).gold_links()
        else:
            out[tid] = {(int(l["start"]), int(l["end"]), str(l["entity"])) for l in d.get("links", [])}
    return out


# TSV resources ----------------------------------------------------------


def _tsv_rows(path, width):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != width:
                raise ValueError(f"{path}:{lineno}: expected {width} tab-separated columns, got {len(cols)}")
            yield lineno, cols


def read_lexicon(path):
    lex = Lexicon()
    for lineno, (surface, entity, prob, count) in _tsv_rows(path, 4):
        try:
            lex.add(surface, entity, float(prob), int(count))
        except ValueError as err:
            raise ValueError(f"{path}:{lineno}: {err}") from None
    return lex


def write_lexicon(lexicon, path):
    atomic_write(path, "".join(
        f"{s}\t{e.entity}\t{e.anchor_prob!r}\t{e.count}\n" for s, e in lexicon.items()
    ))


def read_link_graph(path):
    return LinkGraph.from_pairs((e, p) for _, (e, p) in _tsv_rows(path, 2))


def write_link_graph(graph, path):
    atomic_write(path, "".join(f"{e}\t{p}\n" for e, p in graph.pairs()))


def read_queries(path):
    grouped = {}
    for lineno, (entity, tid, rel) in _tsv_rows(path, 3):
        if rel not in ("0", "1"):
            raise ValueError(f"{path}:{lineno}: relevance must be 0 or 1, got {rel!r}")
        grouped.setdefault(entity, []).append((tid, rel == "1"))
    return [QuerySet(e, tuple(j)) for e, j in grouped.items()]


def write_queries(query_sets, path):
    atomic_write(path, "".join(
        f"{q.entity}\t{tid}\t{int(rel)}\n" for q in query_sets for tid, rel in q.judgments
    ))


# Models -----------------------------------------------------------------


def _stage_dict(ensemble):
    d = ensemble.to_dict()
    meta = dict(d["metadata"])
    # wall-clock timings would break byte-identical model files
    meta["history"] = [[int(r[0]), float(r[1])] for r in meta.get("history", [])]
    d["metadata"] = meta
    return d


def model_to_dict(model, extra=None):
    if isinstance(model, TwoStageSMART):
        stages = [model.stage1_, model.stage2_]
    elif isinstance(model, SMART):
        stages = [model]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    first = stages[0]
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "loss": first.loss,
        "mode": first.mode,
        "feature_dim": first.ensemble_.feature_dim,
        "n_stages": len(stages),
        "config": first.ensemble_.metadata.get("config", {}),
        "extra": extra or {},
        "stages": [_stage_dict(s.ensemble_) for s in stages],
    }


def model_from_dict(d, link_graph=None):
    if d.get("format") != MODEL_FORMAT:
        raise ModelFormatError("not a smartboost model file")
    if d.get("version") != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r}; expected {MODEL_VERSION}")
    stages = [SMART.from_ensemble(Ensemble.from_dict(s)) for s in d["stages"]]
    if len(stages) == 1:
        return stages[0]
    if len(stages) != 2:
        raise ModelFormatError(f"expected 1 or 2 stages, got {len(stages)}")
    model = TwoStageSMART(stages[0].set_params(nil_bias=0.0), link_graph)
    model.stage1_, model.stage2_ = stages
    model.n_features_in_ = stages[0].n_features_in_
    return model


def dumps_model(model, extra=None):
    return json.dumps(model_to_dict(model, extra), indent=1) + "\n"


def save_model(model, path, extra=None):
    atomic_write(path, dumps_model(model, extra))


def load_model(path, link_graph=None):
    with open(path, encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as err:
            raise ModelFormatError(f"{path}: invalid JSON ({err.msg})") from None
    return model_from_dict(d, link_graph)


def n_stages(path):
    with open(path, encoding="utf-8") as fh:
        return int(json.load(fh).get("n_stages", 1))


__all__ = [
    "NIL", "atomic_write", "read_corpus", "write_corpus", "read_tweets", "read_links", "write_links",
    "read_lexicon", "write_lexicon", "read_link_graph", "write_link_graph", "read_queries",
    "write_queries", "save_model", "load_model", "dumps_model", "model_to_dict", "model_from_dict",
]
