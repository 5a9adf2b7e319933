"""Non-overlapping mention lattices and exact inference over them.

A lattice holds the mention candidates of one tweet. Every candidate has a
token span and a list of options, where option 0 is always ``NIL`` and the
remaining options are entity ids. An assignment picks one option per
candidate; it is valid when no two candidates with overlapping spans both
pick a non-Nil option.

All inference works on the Nil-factored form of the score::

    S(y) = sum_k F(k, Nil) + sum_{k : y_k != Nil} (F(k, y_k) - F(k, Nil))

so the valid assignments reduce to weighted sets of pairwise disjoint
intervals. Sorting candidates by start (resp. end) gives a suffix (resp.
prefix) recursion in log space, which is what :func:`backward_table` and
:func:`forward_table` compute.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .exceptions import MalformedSpanError, OracleTooLargeError, ShapeError

NIL = "NIL"

BRUTE_FORCE_LIMIT = 10**6

ScoreTable = Sequence[np.ndarray]
Assignment = tuple


@dataclass(frozen=True, order=True)
class MentionSpan:
    """Half-open token range ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if int(self.start) != self.start or int(self.end) != self.end:
            raise MalformedSpanError(f"span bounds must be integers: {self}")
        if self.start < 0 or self.start >= self.end:
            raise MalformedSpanError(
                f"span must satisfy 0 <= start < end, got ({self.start}, {self.end})"
            )

    def overlaps(self, other: "MentionSpan") -> bool:
        return self.start < other.end and other.start < self.end

    def __len__(self):
        return self.end - self.start


@dataclass(frozen=True)
class Candidate:
    span: MentionSpan
    options: tuple

    @property
    def entities(self) -> tuple:
        return self.options[1:]


@dataclass(frozen=True, eq=False)
class MentionLattice:
    """Canonically ordered mention candidates of one tweet.

    Build instances with :func:`build_lattice`; the constructor assumes the
    candidates are already sorted by ``(start, end)`` with Nil first in
    every option list.
    """

    candidates: tuple = ()

    @property
    def K(self) -> int:
        return len(self.candidates)

    def __len__(self):
        return len(self.candidates)

    @property
    def spans(self) -> list:
        return [c.span for c in self.candidates]

    @property
    def option_counts(self) -> list:
        return [len(c.options) for c in self.candidates]

    def overlaps(self, i: int, j: int) -> bool:
        if i == j:
            return False
        return self.candidates[i].span.overlaps(self.candidates[j].span)

    def overlapping_pairs(self) -> list:
        return [
            (i, j)
            for i, j in itertools.combinations(range(self.K), 2)
            if self.overlaps(i, j)
        ]

    # Index structures for the interval recursions. Candidates are already
    # sorted by start, so the backward pass walks them in lattice order.

    @cached_property
    def _starts(self) -> list:
        return [c.span.start for c in self.candidates]

    @cached_property
    def _ends(self) -> list:
        return [c.span.end for c in self.candidates]

    @cached_property
    def next_compatible(self) -> list:
        """For candidate i, the first lattice index j with start_j >= end_i."""
        return [bisect.bisect_left(self._starts, e) for e in self._ends]

    @cached_property
    def end_order(self) -> list:
        return sorted(range(self.K), key=lambda i: (self._ends[i], i))

    @cached_property
    def prev_compatible_count(self) -> list:
        """For candidate i, how many candidates end at or before start_i."""
        sorted_ends = sorted(self._ends)
        return [bisect.bisect_right(sorted_ends, s) for s in self._starts]

    def is_valid(self, assignment: Sequence[int]) -> bool:
        if len(assignment) != self.K:
            return False
        linked = [k for k, u in enumerate(assignment) if u != 0]
        return not any(self.overlaps(i, j) for i, j in itertools.combinations(linked, 2))

    def links(self, assignment: Sequence[int]) -> set:
        """Non-Nil choices of an assignment as ``(start, end, entity)`` triples."""
        return {
            (c.span.start, c.span.end, c.options[u])
            for c, u in zip(self.candidates, assignment)
            if u != 0
        }


@dataclass(frozen=True)
class InferenceResult:
    log_partition: float
    marginals: list

    def __iter__(self):
        yield self.log_partition
        yield self.marginals


def build_lattice(spans_with_options: Iterable) -> MentionLattice:
    """Build a canonical lattice from ``(start, end, options)`` triples.

    ``options`` is an iterable of entity ids; ``NIL`` is moved to (or
    inserted at) position 0. Candidates are sorted by ``(start, end)`` with
    the input order breaking ties.

    >>> lat = build_lattice([(1, 3, ["e2"]), (0, 2, ["e1"])])
    >>> [c.span.start for c in lat.candidates], lat.candidates[0].options
    ([0, 1], ('NIL', 'e1'))
    """
    items = []
    for start, end, options in spans_with_options:
        span = MentionSpan(start, end)
        opts = [o for o in options if o != NIL]
        if len(set(opts)) != len(opts):
            raise ValueError(f"duplicate entity ids in options of span {span}")
        items.append(Candidate(span, (NIL, *opts)))
    items.sort(key=lambda c: (c.span.start, c.span.end))
    return MentionLattice(tuple(items))


def check_scores(lattice: MentionLattice, scores: ScoreTable) -> list:
    """Validate a score table against a lattice and return float arrays."""
    if len(scores) != lattice.K:
        raise ShapeError(
            f"score table has {len(scores)} rows, lattice has {lattice.K} candidates"
        )
    out = []
    for k, (cand, row) in enumerate(zip(lattice.candidates, scores)):
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (len(cand.options),):
            raise ShapeError(
                f"candidate {k} has {len(cand.options)} options, got scores of shape {row.shape}"
            )
        if not np.all(np.isfinite(row)):
            raise ValueError(f"non-finite score for candidate {k}")
        out.append(row)
    return out


def _logaddexp(a: float, b: float) -> float:
    if a == -math.inf:
        return b
    if b == -math.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


def _logsumexp(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    m = float(values.max())
    if m == -math.inf:
        return m
    return m + math.log(float(np.exp(values - m).sum()))


def _link_weights(scores: list) -> tuple:
    """Per-candidate log-weight of "some entity is linked", relative to Nil."""
    nil_total = 0.0
    weights = []
    for row in scores:
        nil_total += float(row[0])
        weights.append(_logsumexp(row[1:] - row[0]))
    return nil_total, weights


def forward_table(lattice: MentionLattice, weights: Sequence[float]) -> list:
    """Prefix log-sums over candidates taken in order of their end index.

    Entry ``n`` is the log of the total weight of valid link sets drawn from
    the first ``n`` candidates by end position (Nil-relative weights).
    """
    order = lattice.end_order
    prev = lattice.prev_compatible_count
    alpha = [0.0] * (lattice.K + 1)
    for n, k in enumerate(order, start=1):
        alpha[n] = _logaddexp(alpha[n - 1], weights[k] + alpha[prev[k]])
    return alpha


def backward_table(lattice: MentionLattice, weights: Sequence[float]) -> list:
    """Suffix log-sums over candidates in lattice (start) order.

    Entry ``i`` covers candidates ``i..K-1``; entry ``K`` is 0.
    """
    nxt = lattice.next_compatible
    beta = [0.0] * (lattice.K + 1)
    for i in range(lattice.K - 1, -1, -1):
        beta[i] = _logaddexp(beta[i + 1], weights[i] + beta[nxt[i]])
    return beta


def log_partition(lattice: MentionLattice, scores: ScoreTable) -> float:
    """ln Z: log of the summed exp-score over all valid assignments."""
    rows = check_scores(lattice, scores)
    nil_total, weights = _link_weights(rows)
    return nil_total + forward_table(lattice, weights)[-1]


def marginals(lattice: MentionLattice, scores: ScoreTable) -> InferenceResult:
    """Exact per-option marginals P(y_k = u | x) and ln Z."""
    rows = check_scores(lattice, scores)
    nil_total, weights = _link_weights(rows)
    alpha = forward_table(lattice, weights)
    beta = backward_table(lattice, weights)
    log_z_rel = alpha[-1]
    prev = lattice.prev_compatible_count
    nxt = lattice.next_compatible
    probs = []
    for k, row in enumerate(rows):
        p = np.empty_like(row)
        context = alpha[prev[k]] + beta[nxt[k]] - log_z_rel
        p[1:] = np.exp(row[1:] - row[0] + context)
        # Nil is the complement; expm1 keeps precision when linking is near-certain.
        p[0] = -math.expm1(weights[k] + context) if len(row) > 1 else 1.0
        probs.append(np.clip(p, 0.0, 1.0))
    return InferenceResult(nil_total + log_z_rel, probs)


def assignment_score(scores: ScoreTable, assignment: Sequence[int]) -> float:
    return float(sum(float(row[u]) for row, u in zip(scores, assignment)))


def viterbi(lattice: MentionLattice, scores: ScoreTable) -> tuple:
    """Highest-scoring valid assignment and its score.

    Ties resolve to the lexicographically smallest option-index tuple in
    lattice order: Nil wins over an entity, a lower option index wins over a
    higher one, and earlier candidates are resolved first.
    """
    rows = check_scores(lattice, scores)
    K = lattice.K
    gains, best = [], []
    for row in rows:
        if len(row) > 1:
            rel = row[1:] - row[0]
            j = int(np.argmax(rel))
            gains.append(float(rel[j]))
            best.append(j + 1)
        else:
            gains.append(-math.inf)
            best.append(0)

    nxt = lattice.next_compatible
    value = [0.0] * (K + 1)
    for i in range(K - 1, -1, -1):
        value[i] = max(value[i + 1], gains[i] + value[nxt[i]])

    choice = [0] * K
    i = 0
    while i < K:
        if gains[i] + value[nxt[i]] > value[i + 1]:
            choice[i] = best[i]
            i = nxt[i]
        else:
            i += 1
    assignment = tuple(choice)
    return assignment, assignment_score(rows, assignment)


def brute_force(lattice: MentionLattice, scores: ScoreTable) -> tuple:
    """Enumerate every option tuple; returns ``(InferenceResult, argmax)``.

    Testing oracle for :func:`marginals` and :func:`viterbi`. The argmax uses
    the same tie rule as :func:`viterbi` (first maximum in lexicographic
    enumeration order).
    """
    rows = check_scores(lattice, scores)
    K = lattice.K
    if K == 0:
        return InferenceResult(0.0, []), ()
    sizes = [len(r) for r in rows]
    total = math.prod(sizes)
    if total > BRUTE_FORCE_LIMIT:
        raise OracleTooLargeError(f"{total} configurations exceed {BRUTE_FORCE_LIMIT}")

    grid = np.indices(sizes).reshape(K, -1).T
    totals = np.zeros(total)
    for k, row in enumerate(rows):
        totals += row[grid[:, k]]
    valid = np.ones(total, dtype=bool)
    for i, j in lattice.overlapping_pairs():
        valid &= ~((grid[:, i] > 0) & (grid[:, j] > 0))

    log_z = _logsumexp(totals[valid])
    probs = []
    for k, size in enumerate(sizes):
        p = np.zeros(size)
        for u in range(size):
            sel = valid & (grid[:, k] == u)
            if sel.any():
                p[u] = math.exp(_logsumexp(totals[sel]) - log_z)
        probs.append(p)

    masked = np.where(valid, totals, -np.inf)
    best = tuple(int(u) for u in grid[int(np.argmax(masked))])
    return InferenceResult(log_z, probs), best


def apply_nil_bias(scores: ScoreTable, b: float) -> list:
    """Return a copy of ``scores`` with ``b`` added to every Nil entry."""
    if not math.isfinite(b):
        raise ValueError(f"Nil bias must be finite, got {b}")
    out = []
    for row in scores:
        row = np.array(row, dtype=np.float64)
        row[0] += b
        out.append(row)
    return out


def independent_decode(scores: ScoreTable) -> tuple:
    """Per-candidate argmax, ignoring overlap (lowest option index on ties)."""
    return tuple(int(np.argmax(row)) for row in scores)
