import numpy as np
import pytest

from smartboost.corpus import make_example
from smartboost.lattice import NIL, build_lattice


def random_lattice(rng, max_k=8, max_entities=4, max_tokens=10, min_k=0):
    """Random lattice with a mix of nested, crossing and disjoint spans."""
    K = int(rng.integers(min_k, max_k + 1))
    spans = []
    for k in range(K):
        start = int(rng.integers(0, max_tokens - 1))
        end = int(rng.integers(start + 1, min(start + 4, max_tokens) + 1))
        n_ent = int(rng.integers(0, max_entities + 1))
        spans.append((start, end, [f"e{k}_{j}" for j in range(n_ent)]))
    return build_lattice(spans)


def random_scores(rng, lattice, low=-5.0, high=5.0):
    return [rng.uniform(low, high, size=len(c.options)) for c in lattice.candidates]


def random_example(rng, feature_dim=3, max_k=5, max_entities=3, with_gold=True):
    """Random labeled example; gold is a random valid assignment."""
    lattice = random_lattice(rng, max_k=max_k, max_entities=max_entities, min_k=1)
    gold = []
    for k, cand in enumerate(lattice.candidates):
        linked = [j for j, u in enumerate(gold) if u and lattice.overlaps(j, k)]
        gold.append(0 if linked or rng.random() < 0.4 else int(rng.integers(len(cand.options))))
    raw = []
    for cand, g in zip(lattice.candidates, gold):
        opts = [(e, rng.normal(size=feature_dim), with_gold and u == g) for u, e in enumerate(cand.options)]
        raw.append((cand.span.start, cand.span.end, opts))
    return make_example(f"x{int(rng.integers(10**9))}", [f"w{i}" for i in range(12)], raw)


def single(entities=("e",), span=(0, 1), gold=None, features=None, tid="t"):
    """One-candidate example with 1-D features equal to the option index."""
    opts = [NIL, *entities]
    rows = features if features is not None else [[float(u)] for u in range(len(opts))]
    raw = [(span[0], span[1], [(o, rows[u], gold is not None and u == gold) for u, o in enumerate(opts)])]
    return make_example(tid, ["a", "b", "c"], raw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
