"""Command-line interface: ``smart-boost <command> [flags]``.

Exit status is 0 on success, 2 on usage errors and 1 on data/runtime errors.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import logging
import sys
from pathlib import Path

from . import io
from .boosting import SMART
from .evaluation import eval_ie, eval_ir, parse_grid, tune_bias
from .exceptions import ConfigError, SmartBoostError
from .linking import DEFAULT_MAX_NGRAM, TwoStageSMART, featurize
from .synth import SynthConfig, generate

logger = logging.getLogger("smartboost")


def _metrics_json(d):
    return json.dumps(d, indent=1) + "\n"


def _emit(text, out):
    if out:
        io.atomic_write(out, text)
    sys.stdout.write(text)


def _log_csv(model):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if isinstance(model, TwoStageSMART):
        w.writerow(["stage", "round", "train_loss", "seconds"])
        for stage, est in ((1, model.stage1_), (2, model.stage2_)):
            for r in est.train_log_:
                w.writerow([stage, r[0], repr(r[1]), f"{r[2]:.3f}"])
    else:
        w.writerow(["round", "train_loss", "seconds"])
        for r in model.train_log_:
            w.writerow([r[0], repr(r[1]), f"{r[2]:.3f}"])
    return buf.getvalue()


def cmd_train(args, parser):
    if args.two_stage and not args.link_graph:
        parser.error("--two-stage requires --link-graph")
    corpus = io.read_corpus(args.corpus)
    base = SMART(
        n_trees=args.trees,
        learning_rate=args.shrinkage,
        min_leaf=args.min_leaf,
        max_depth=args.max_depth,
        loss=args.loss,
        mode=args.mode,
    )
    base._config()  # validate before reading more input
    if args.two_stage:
        model = TwoStageSMART(base, io.read_link_graph(args.link_graph)).fit(corpus)
    else:
        model = base.fit(corpus)
    io.save_model(model, args.model_out, extra={"seed": args.seed})
    log_out = args.log_out or str(args.model_out) + ".log.csv"
    io.atomic_write(log_out, _log_csv(model))
    logger.info("wrote %s and %s", args.model_out, log_out)


def _load(args, parser):
    stages = io.n_stages(args.model)
    if stages == 2 and not args.link_graph:
        parser.error("this is a two-stage model; --link-graph is required")
    graph = io.read_link_graph(args.link_graph) if args.link_graph else None
    return io.load_model(args.model, graph)


def cmd_predict(args, parser):
    model = _load(args, parser)
    corpus = io.read_corpus(args.corpus)
    model.set_params(nil_bias=args.nil_bias)
    links = model.predict_links(corpus)
    io.write_links(links, args.out, order=[ex.id for ex in corpus])


def cmd_eval_ie(args, parser):
    report = eval_ie(io.read_links(args.pred), io.read_links(args.gold))
    _emit(_metrics_json({"policy": "ie", **report.to_dict()}), args.out)


def cmd_eval_ir(args, parser):
    report = eval_ir(io.read_links(args.pred), io.read_queries(args.queries))
    _emit(_metrics_json(report.to_dict()), args.out)


def cmd_tune_bias(args, parser):
    grid = parse_grid(args.grid)
    if args.policy == "ir" and not args.queries:
        parser.error("--policy ir requires --queries")
    model = _load(args, parser)
    dev = io.read_corpus(args.corpus)
    queries = io.read_queries(args.queries) if args.queries else None
    sweep = tune_bias(model, dev, grid, args.policy, queries)
    if args.sweep_out:
        io.atomic_write(args.sweep_out, sweep.to_csv())
    metrics = sweep.best.to_dict() if args.policy == "ir" else {"policy": "ie", **sweep.best.to_dict()}
    _emit(_metrics_json({"bias": sweep.best_bias, **metrics}), args.out)


def cmd_synth(args, parser):
    cfg = SynthConfig(
        seed=args.seed,
        num_tweets=args.tweets,
        tokens_per_tweet=args.tokens,
        candidate_density=args.density,
        entities_per_candidate=args.max_entities,
        feature_dim=args.feature_dim,
        overlap_rate=args.overlap_rate,
        nonlinearity=args.nonlinearity,
        noise=args.noise,
    )
    data = generate(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_corpus(data.train, out / "train.jsonl")
    io.write_corpus(data.dev, out / "dev.jsonl")
    io.write_corpus(data.test, out / "test.jsonl")
    io.write_link_graph(data.link_graph, out / "link_graph.tsv")
    io.write_queries(data.queries, out / "queries.tsv")
    io.atomic_write(out / "config.json", json.dumps(cfg.to_dict(), indent=1) + "\n")


def cmd_featurize(args, parser):
    lexicon = io.read_lexicon(args.lexicon)
    examples = [featurize(t, lexicon, gold, args.max_ngram) for t, gold in io.read_tweets(args.tweets)]
    io.write_corpus(examples, args.out)


def build_parser():
    p = argparse.ArgumentParser(prog="smart-boost", description="Structured boosted trees for entity linking.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model on a labeled corpus")
    t.add_argument("--corpus", required=True)
    t.add_argument("--model-out", required=True)
    t.add_argument("--log-out", help="training log CSV (default: MODEL_OUT.log.csv)")
    t.add_argument("--loss", choices=["log", "hinge"], default="log")
    t.add_argument("--mode", choices=["structured", "independent"], default="structured")
    t.add_argument("--trees", type=int, default=300)
    t.add_argument("--min-leaf", type=int, default=30)
    t.add_argument("--max-depth", type=int, default=4)
    t.add_argument("--shrinkage", type=float, default=1.0)
    t.add_argument("--two-stage", action="store_true")
    t.add_argument("--link-graph")
    t.add_argument("--seed", type=int, default=0, help="recorded in the model; training is deterministic")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="decode links for a corpus")
    pr.add_argument("--model", required=True)
    pr.add_argument("--corpus", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--nil-bias", type=float, default=0.0)
    pr.add_argument("--link-graph")
    pr.set_defaults(func=cmd_predict)

    ie = sub.add_parser("eval-ie", help="overlap-relaxed link P/R/F1")
    ie.add_argument("--pred", required=True)
    ie.add_argument("--gold", required=True, help="links JSONL or labeled corpus JSONL")
    ie.add_argument("--out")
    ie.set_defaults(func=cmd_eval_ie)

    ir = sub.add_parser("eval-ir", help="per-query relevance P/R/F1")
    ir.add_argument("--pred", required=True)
    ir.add_argument("--queries", required=True)
    ir.add_argument("--out")
    ir.set_defaults(func=cmd_eval_ir)

    tb = sub.add_parser("tune-bias", help="sweep the Nil bias on a dev corpus")
    tb.add_argument("--model", required=True)
    tb.add_argument("--corpus", required=True)
    tb.add_argument("--grid", default="-3:3:0.25")
    tb.add_argument("--policy", choices=["ie", "ir"], default="ie")
    tb.add_argument("--queries")
    tb.add_argument("--link-graph")
    tb.add_argument("--sweep-out")
    tb.add_argument("--out")
    tb.set_defaults(func=cmd_tune_bias)

    sy = sub.add_parser("synth", help="write a synthetic corpus")
    d = SynthConfig()
    sy.add_argument("--out-dir", required=True)
    sy.add_argument("--seed", type=int, default=d.seed)
    sy.add_argument("--tweets", type=int, default=d.num_tweets)
    sy.add_argument("--tokens", type=int, default=d.tokens_per_tweet)
    sy.add_argument("--density", type=float, default=d.candidate_density)
    sy.add_argument("--max-entities", type=int, default=d.entities_per_candidate)
    sy.add_argument("--feature-dim", type=int, default=d.feature_dim)
    sy.add_argument("--overlap-rate", type=float, default=d.overlap_rate)
    sy.add_argument("--nonlinearity", choices=["xor", "threshold-product"], default=d.nonlinearity)
    sy.add_argument("--noise", type=float, default=d.noise)
    sy.set_defaults(func=cmd_synth)

    fz = sub.add_parser("featurize", help="build a corpus from raw tweets and a lexicon")
    fz.add_argument("--tweets", required=True, help='JSONL {"id", "tokens", "links"?}')
    fz.add_argument("--lexicon", required=True)
    fz.add_argument("--out", required=True)
    fz.add_argument("--max-ngram", type=int, default=DEFAULT_MAX_NGRAM)
    fz.set_defaults(func=cmd_featurize)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, parser)
    except ConfigError as err:
        print(f"smart-boost: error: {err}", file=sys.stderr)
        return 2
    except (SmartBoostError, ValueError, KeyError, OSError) as err:
        print(f"smart-boost: error: {err}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
