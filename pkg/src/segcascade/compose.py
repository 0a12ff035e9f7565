"""Structured (sigma) composition of a time-stamped graph with a label model.

The composed graph has pair states ``(vA, vB, flag)``.  Matching edges pair
an A edge with a B arc whose input equals the A edge's current output
label; the composed edge reads A's input and writes B's output.  Two kinds
of one-sided moves exist on top of that:

* B-only moves follow an epsilon-input B arc (the LM backoff arc) without
  consuming anything from A.  The flag bit is set afterwards and no second
  B-only move may follow until an A edge has been consumed, which rules out
  epsilon cycles.
* A-only moves follow an A edge whose output is epsilon (only present when
  A is itself a composed graph).

Composition does not add w_A and w_B.  The composed edge remembers both
source weights (``left_weight`` / ``right_weight``) so a scorer can turn
them into features.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .errors import EmptyResult
from .graph import EPS, DecodingGraph, current_label, trim

PairState = tuple[int, int, int]
NONE = -1


@dataclass(frozen=True, order=True)
class ComposedEdge:
    """Provenance of a composed edge; -1 marks the side that did not move."""

    left: int
    right: int


class ComposedGraph(DecodingGraph):
    _vertex_fields = DecodingGraph._vertex_fields + ("pairs",)
    _edge_fields = DecodingGraph._edge_fields + ("left", "right", "left_weight", "right_weight")

    def __init__(self) -> None:
        super().__init__()
        self.pairs: list[PairState] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.left_weight: list[float] = []
        self.right_weight: list[float] = []

    def provenance(self, e: int) -> ComposedEdge:
        return ComposedEdge(int(self.left[e]), int(self.right[e]))


class _ArcIndex:
    """B arcs bucketed by (tail, input label); epsilon arcs by tail."""

    def __init__(self, b: DecodingGraph) -> None:
        self.by_label: dict[tuple[int, int], list[int]] = {}
        self.eps: dict[int, list[int]] = {}
        self.by_input: dict[int, list[int]] = {}
        for e in range(b.num_edges):
            t, lab = int(b.tails[e]), b.ilabels[e]
            if lab == EPS:
                self.eps.setdefault(t, []).append(e)
            else:
                self.by_label.setdefault((t, lab), []).append(e)
                self.by_input.setdefault(lab, []).append(e)


_index_cache: "weakref.WeakKeyDictionary[DecodingGraph, _ArcIndex]" = weakref.WeakKeyDictionary()


def _arc_index(b: DecodingGraph) -> _ArcIndex:
    idx = _index_cache.get(b)
    if idx is None:
        idx = _index_cache[b] = _ArcIndex(b)
    return idx


def _a_out(a: DecodingGraph, v: int) -> Iterator[int]:
    if a.sealed:
        return (int(e) for e in a.out_edges(v))
    return (e for e in range(a.num_edges) if a.tails[e] == v)


def epsilon_step(b: DecodingGraph, state: PairState) -> list[tuple[int, PairState]]:
    """B-only moves available at a pair state: (B arc id, next state)."""
    va, vb, flag = state
    if flag:
        return []
    return [(e, (va, int(b.heads[e]), 1)) for e in _arc_index(b).eps.get(vb, [])]


def lazy_neighbors(a: DecodingGraph, b: DecodingGraph,
                   state: PairState) -> list[tuple[ComposedEdge, PairState]]:
    """Out-edges of a pair state, ordered by (A edge id, B edge id), -1 first."""
    va, vb, _ = state
    idx = _arc_index(b)
    out = [(ComposedEdge(NONE, e), nxt) for e, nxt in epsilon_step(b, state)]
    for e1 in _a_out(a, va):
        lab = current_label(a.olabels[e1])
        ha = int(a.heads[e1])
        if lab == EPS:
            out.append((ComposedEdge(e1, NONE), (ha, vb, 0)))
            continue
        for e2 in idx.by_label.get((vb, lab), ()):
            out.append((ComposedEdge(e1, e2), (ha, int(b.heads[e2]), 0)))
    return out


def initial_states(a: DecodingGraph, b: DecodingGraph) -> list[PairState]:
    return sorted((ia, ib, 0) for ia in a.initials for ib in b.initials)


def is_final_state(a: DecodingGraph, b: DecodingGraph, state: PairState) -> bool:
    return state[0] in a.finals and state[1] in b.finals


def composed_labels(a: DecodingGraph, b: DecodingGraph, edge: ComposedEdge):
    """(input, output) labels of a composed edge: i_A(e1) and o_B(e2)."""
    ilab = a.ilabels[edge.left] if edge.left != NONE else EPS
    olab = b.olabels[edge.right] if edge.right != NONE else EPS
    return ilab, olab


def _edge_weights(a: DecodingGraph, b: DecodingGraph, edge: ComposedEdge) -> tuple[float, float]:
    lw = float(a.weights[edge.left]) if edge.left != NONE else 0.0
    rw = float(b.weights[edge.right]) if edge.right != NONE else 0.0
    return lw, rw


def _build(a: DecodingGraph, b: DecodingGraph, states: list[PairState],
           edges: list[tuple[PairState, PairState, ComposedEdge]]) -> ComposedGraph:
    """Materialize pair states and edges, trim, and lay out canonically.

    Canonical layout: vertices sorted by (time, vA, flag, vB); edges by
    (tail vertex, A edge id, B edge id).  Both composition routes go
    through here, so equal edge sets give identical graphs.
    """
    raw = ComposedGraph()
    vid: dict[PairState, int] = {}
    for st in states:
        vid[st] = raw.add_vertex(a.times[st[0]], initial=False, final=False)
        raw.pairs.append(st)
    for st in states:
        if st[2] == 0 and st[0] in a.initials and st[1] in b.initials:
            raw.initials.add(vid[st])
        if is_final_state(a, b, st):
            raw.finals.add(vid[st])
    for tail, head, ce in edges:
        ilab, olab = composed_labels(a, b, ce)
        raw.add_edge(vid[tail], vid[head], ilab, olab)
        raw.left.append(ce.left)
        raw.right.append(ce.right)
        lw, rw = _edge_weights(a, b, ce)
        raw.left_weight.append(lw)
        raw.right_weight.append(rw)
    raw.seal()
    trimmed, _ = trim(raw)
    if trimmed.num_edges == 0:
        raise EmptyResult("composition has no accepting path")
    return canonicalize(trimmed)


def canonicalize(g: ComposedGraph) -> ComposedGraph:
    vorder = sorted(range(g.num_vertices),
                    key=lambda v: (int(g.times[v]), g.pairs[v][0], g.pairs[v][2], g.pairs[v][1]))
    rank = {v: i for i, v in enumerate(vorder)}
    eorder = sorted(range(g.num_edges),
                    key=lambda e: (rank[int(g.tails[e])], int(g.left[e]), int(g.right[e])))
    return g.subgraph(vorder, eorder)


def sigma_compose(a: DecodingGraph, b: DecodingGraph,
                  scorer: Callable[[ComposedGraph], np.ndarray] | None = None) -> ComposedGraph:
    """Eager product construction over E_A x E_B, then trim.

    ``scorer`` maps the composed graph to its edge weights; without one the
    result is unscored.
    """
    idx = _arc_index(b)
    nb = b.num_vertices
    states: set[PairState] = set()
    edges: list[tuple[PairState, PairState, ComposedEdge]] = []
    for e1 in range(a.num_edges):
        ta, ha = int(a.tails[e1]), int(a.heads[e1])
        lab = current_label(a.olabels[e1])
        if lab == EPS:
            for vb in range(nb):
                for flag in (0, 1):
                    edges.append(((ta, vb, flag), (ha, vb, 0), ComposedEdge(e1, NONE)))
            continue
        for e2 in idx.by_input.get(lab, ()):
            tb, hb = int(b.tails[e2]), int(b.heads[e2])
            for flag in (0, 1):
                edges.append(((ta, tb, flag), (ha, hb, 0), ComposedEdge(e1, e2)))
    for va in range(a.num_vertices):
        for eps_arcs in idx.eps.values():
            for e2 in eps_arcs:
                tb, hb = int(b.tails[e2]), int(b.heads[e2])
                edges.append(((va, tb, 0), (va, hb, 1), ComposedEdge(NONE, e2)))
    for tail, head, _ in edges:
        states.add(tail)
        states.add(head)
    states.update(initial_states(a, b))
    g = _build(a, b, sorted(states), edges)
    return g.with_weights(scorer(g)) if scorer is not None else g


def expand_lazy(a: DecodingGraph, b: DecodingGraph) -> tuple[list[PairState], list[tuple[PairState, PairState, ComposedEdge]]]:
    """Depth-first expansion through :func:`lazy_neighbors`, dead ends included."""
    seen: set[PairState] = set()
    edges = []
    stack = list(reversed(initial_states(a, b)))
    seen.update(stack)
    while stack:
        st = stack.pop()
        for ce, nxt in lazy_neighbors(a, b, st):
            edges.append((st, nxt, ce))
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return sorted(seen), edges


def compose_lazily(a: DecodingGraph, b: DecodingGraph) -> ComposedGraph:
    """Materialize the lazy expansion and trim it; equals :func:`sigma_compose`."""
    states, edges = expand_lazy(a, b)
    return _build(a, b, states, edges)
