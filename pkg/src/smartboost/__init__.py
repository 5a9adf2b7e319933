"""smartboost: structured gradient-boosted regression trees for entity linking."""

from .boosting import SMART, BoostConfig, Ensemble, train
from .corpus import LinkingExample, Tweet, make_example
from .evaluation import MetricsReport, eval_ie, eval_ir, tune_bias
from .lattice import NIL, MentionLattice, MentionSpan, build_lattice, log_partition, marginals, viterbi
from .linking import LinkGraph, Lexicon, TwoStageSMART
from .trees import CARTRegressor, RegressionTree, TreeConfig, train_tree

__version__ = "0.1.0"

__all__ = [
    "NIL", "SMART", "TwoStageSMART", "CARTRegressor", "BoostConfig", "Ensemble", "train",
    "LinkingExample", "Tweet", "make_example", "MetricsReport", "eval_ie", "eval_ir", "tune_bias",
    "MentionLattice", "MentionSpan", "build_lattice", "log_partition", "marginals", "viterbi",
    "LinkGraph", "Lexicon", "RegressionTree", "TreeConfig", "train_tree",
]
