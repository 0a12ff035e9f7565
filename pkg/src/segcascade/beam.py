"""Time-synchronous beam search over eager or lazily composed graphs.

Hypotheses are recombined per state (a vertex, or a pair state under lazy
composition) and grouped by the state's time stamp.  A time slice is first
closed under same-time moves (epsilon moves), then cut to the ``width``
best states, and only the survivors are expanded into later slices.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any, Callable, Hashable, Sequence

import numpy as np

from .compose import ComposedEdge, initial_states, is_final_state, lazy_neighbors
from .errors import NoCompletePath
from .features import EdgeContext
from .graph import EPS, DecodingGraph, best_path, current_label


@dataclass(frozen=True)
class BeamResult:
    edges: tuple          # edge ids (eager) or ComposedEdge provenance (lazy)
    score: float
    labels: tuple[int, ...]
    expanded: int         # states expanded, a cost measure


class _Search:
    """Bookkeeping shared by the eager and lazy front ends."""

    def __init__(self) -> None:
        self.score: dict[Hashable, float] = {}
        self.back: dict[Hashable, tuple[Hashable, Any] | None] = {}

    def path(self, state: Hashable) -> list:
        out = []
        while self.back[state] is not None:
            prev, edge = self.back[state]
            out.append(edge)
            state = prev
        out.reverse()
        return out

    def relax(self, tail: Hashable, edge: Any, head: Hashable, w: float, key) -> bool:
        cand = self.score[tail] + w
        old = self.score.get(head)
        if old is not None:
            if cand < old:
                return False
            if cand == old:
                mine = [key(x) for x in self.path(tail)] + [key(edge)]
                theirs = [key(x) for x in self.path(head)]
                if mine >= theirs:
                    return False
        self.score[head] = cand
        self.back[head] = (tail, edge)
        return old is None


@dataclass(frozen=True)
class _Start:
    """The empty hypothesis at an initial state.

    Kept apart from the state itself so that an initial state reached by
    a non-empty path is a separate hypothesis, and so that the empty path
    never counts as a complete one.
    """

    state: Hashable


def _run(starts: Sequence[Hashable], time_of: Callable, rank_of: Callable,
         out_edges: Callable, is_final: Callable, width: int | None, key) -> tuple[_Search, Hashable, int]:
    if width is not None and width < 1:
        raise ValueError("beam width must be >= 1")
    inner_time, inner_rank, inner_outs, inner_final = time_of, rank_of, out_edges, is_final

    def unwrap(s):
        return s.state if isinstance(s, _Start) else s

    def time_of(s):
        return inner_time(unwrap(s))

    def rank_of(s):
        return (inner_rank(unwrap(s)), 0 if isinstance(s, _Start) else 1)

    def out_edges(s):
        return inner_outs(unwrap(s))

    def is_final(s):
        return not isinstance(s, _Start) and inner_final(s)

    starts = [_Start(s) for s in starts]
    srch = _Search()
    slices: dict[int, set] = {}
    times: list[int] = []
    for s in starts:
        srch.score[s] = 0.0
        srch.back[s] = None
        t = time_of(s)
        if t not in slices:
            slices[t] = set()
            heapq.heappush(times, t)
        slices[t].add(s)
    best_final, expanded = None, 0
    while times:
        t = heapq.heappop(times)
        members = slices.pop(t)
        # close the slice under same-time moves, in topological order
        todo = [(rank_of(s), s) for s in members]
        heapq.heapify(todo)
        done = set()
        edges_of: dict[Hashable, list] = {}
        while todo:
            _, s = heapq.heappop(todo)
            if s in done:
                continue
            done.add(s)
            outs = edges_of[s] = out_edges(s)
            for edge, head, w in outs:
                if time_of(head) == t:
                    srch.relax(s, edge, head, w, key)
                    if head not in done:
                        heapq.heappush(todo, (rank_of(head), head))
        members = done
        kept = sorted(members, key=lambda s: (-srch.score[s], rank_of(s)))
        if width is not None:
            # the width counts states; a start hypothesis rides with its state
            allowed: set = set()
            for s in kept:
                if len(allowed) == width:
                    break
                allowed.add(unwrap(s))
            for s in kept:
                if unwrap(s) not in allowed:
                    del srch.score[s]
            kept = [s for s in kept if unwrap(s) in allowed]
        for s in kept:
            if is_final(s):
                if best_final is None or srch.score[s] > srch.score[best_final] or (
                        srch.score[s] == srch.score[best_final]
                        and [key(x) for x in srch.path(s)] < [key(x) for x in srch.path(best_final)]):
                    best_final = s
        for s in kept:
            expanded += 1
            for edge, head, w in edges_of[s]:
                th = time_of(head)
                if th == t:
                    continue
                if srch.relax(s, edge, head, w, key):
                    if th not in slices:
                        slices[th] = set()
                        heapq.heappush(times, th)
                    slices[th].add(head)
    if best_final is None:
        raise NoCompletePath("no hypothesis reached a final state")
    return srch, best_final, expanded


def beam_decode(g: DecodingGraph, width: int | None, weights=None) -> BeamResult:
    """Beam search over a materialized graph; ``width=None`` disables pruning."""
    w = g.weights if weights is None else np.asarray(weights, dtype=np.float64)
    rank = np.empty(g.num_vertices, dtype=np.int64)
    rank[g.order] = np.arange(g.num_vertices)
    times = g.times
    finals = g.finals

    def outs(v):
        return [(int(e), int(g.heads[e]), float(w[e])) for e in g.out_edges(v)]

    srch, last, expanded = _run(sorted(g.initials), lambda v: int(times[v]),
                                lambda v: (int(rank[v]), v), outs, lambda v: v in finals,
                                width, key=lambda e: e)
    edges = tuple(srch.path(last))
    labels = tuple(current_label(g.olabels[e]) for e in edges
                   if g.ilabels[e] != EPS and current_label(g.olabels[e]) != EPS)
    return BeamResult(edges, srch.score[last], labels, expanded)


class LazyGraph:
    """A composition A o B explored on demand, with edges scored by a callback.

    ``scorer`` receives the :class:`EdgeContext` of a composed edge: its
    span and labels, plus the ``lattice`` (A weight) and ``lm`` (B weight)
    attributes.
    """

    def __init__(self, a: DecodingGraph, b: DecodingGraph, scorer: Callable[[EdgeContext], float]):
        self.a, self.b, self.scorer = a, b, scorer
        self._rank = np.empty(a.num_vertices, dtype=np.int64)
        self._rank[a.order] = np.arange(a.num_vertices)

    def time_of(self, state) -> int:
        return int(self.a.times[state[0]])

    def rank_of(self, state):
        return (int(self._rank[state[0]]), state[2], state[1])

    def context(self, edge: ComposedEdge) -> EdgeContext:
        a, b = self.a, self.b
        attrs = {"lattice": float(a.weights[edge.left]) if edge.left >= 0 else 0.0,
                 "lm": float(b.weights[edge.right]) if edge.right >= 0 else 0.0}
        if edge.left < 0 or edge.right < 0:
            return EdgeContext(None, None, EPS, EPS, attrs)
        olab = b.olabels[edge.right]
        hist = olab[0] if isinstance(olab, tuple) else EPS
        return EdgeContext(int(a.times[a.tails[edge.left]]), int(a.times[a.heads[edge.left]]),
                           current_label(olab), hist, attrs)

    def out_edges(self, state):
        return [(ce, nxt, self.scorer(self.context(ce)))
                for ce, nxt in lazy_neighbors(self.a, self.b, state)]

    def max_frontier(self) -> int:
        """Most pair states sharing a time stamp in the full (untrimmed) expansion."""
        from .compose import expand_lazy
        states, _ = expand_lazy(self.a, self.b)
        counts: dict[int, int] = {}
        for s in states:
            counts[self.time_of(s)] = counts.get(self.time_of(s), 0) + 1
        return max(counts.values())


def beam_decode_lazy(lg: LazyGraph, width: int | None) -> BeamResult:
    srch, last, expanded = _run(initial_states(lg.a, lg.b), lg.time_of, lg.rank_of, lg.out_edges,
                                lambda s: is_final_state(lg.a, lg.b, s), width,
                                key=lambda ce: (ce.left, ce.right))
    edges = tuple(srch.path(last))
    labels = tuple(lg.context(ce).label for ce in edges if ce.left >= 0 and ce.right >= 0)
    return BeamResult(edges, srch.score[last], labels, expanded)


def max_frontier(g: DecodingGraph) -> int:
    """Largest number of vertices sharing one time stamp."""
    return int(np.bincount(np.asarray(g.times) - np.min(g.times)).max())


@dataclass(frozen=True)
class HitRecord:
    beam_score: float
    exact_score: float
    hit: bool


def compare_to_exact(g: DecodingGraph, width: int | None, weights=None) -> HitRecord:
    w = g.weights if weights is None else np.asarray(weights, dtype=np.float64)
    exact, exact_score = best_path(g, w)
    try:
        res = beam_decode(g, width, w)
    except NoCompletePath:  # every survivor ran into a dead end: a miss
        return HitRecord(float("-inf"), exact_score, False)
    return HitRecord(res.score, exact_score, res.edges == exact.edges)


def hit_rate(graphs: Sequence[DecodingGraph], width: int | None,
             weights: Sequence[np.ndarray] | None = None) -> tuple[float, list[HitRecord]]:
    """Fraction of graphs where beam search returns the exact best path."""
    recs = [compare_to_exact(g, width, None if weights is None else weights[i])
            for i, g in enumerate(graphs)]
    if not recs:
        return 1.0, recs
    return sum(r.hit for r in recs) / len(recs), recs
