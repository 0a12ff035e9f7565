"""Time-stamped weighted FSTs and max-plus passes over them.

A :class:`DecodingGraph` is built by appending vertices and edges, then
sealed.  Sealing freezes the structure, computes a deterministic topological
order and CSR adjacency (by tail and by head), and groups vertices into
depth levels so that the forward and backward passes run as one vectorized
relaxation per level.

Edge weights live in a float array where NaN marks an edge that has not
been scored yet.  Every pass also accepts an explicit ``weights`` array so
the same sealed structure can be rescored (e.g. once per SGD step) without
copying.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import CycleDetected, GraphNotSealed, NoPath, TooManyPaths, UnscoredEdge

#: label id of the empty label
EPS = -1
#: saturating sentinel for "no path"; -inf + finite stays -inf
NEG_INF = float("-inf")
#: weight marker for an edge that has not been scored
UNSCORED = float("nan")


def current_label(olabel: Any) -> int:
    """The label a segment is tagged with, for plain or pair output labels."""
    if isinstance(olabel, tuple):
        return olabel[-1]
    return olabel


@dataclass(frozen=True)
class Path:
    """Edge ids from an initial to a final vertex, in traversal order."""

    edges: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def is_valid(self, g: "DecodingGraph") -> bool:
        if not self.edges or len(set(self.edges)) != len(self.edges):
            return False
        if g.tails[self.edges[0]] not in g.initials:
            return False
        if g.heads[self.edges[-1]] not in g.finals:
            return False
        return all(g.heads[a] == g.tails[b] for a, b in zip(self.edges, self.edges[1:]))


class DecodingGraph:
    """G = (V, E, I, F, w, i, o) with a time stamp on every vertex."""

    # per-vertex / per-edge lists carried through subgraph extraction;
    # subclasses append their own provenance fields
    _vertex_fields: tuple[str, ...] = ("times",)
    _edge_fields: tuple[str, ...] = ("tails", "heads", "ilabels", "olabels", "weights")

    def __init__(self) -> None:
        self.times: list[int] | np.ndarray = []
        self.tails: list[int] | np.ndarray = []
        self.heads: list[int] | np.ndarray = []
        self.ilabels: list[Any] = []
        self.olabels: list[Any] = []
        self.weights: list[float] | np.ndarray = []
        self.initials: set[int] = set()
        self.finals: set[int] = set()
        self.sealed = False

    # -- construction -----------------------------------------------------

    @property
    def num_vertices(self) -> int:
        return len(self.times)

    @property
    def num_edges(self) -> int:
        return len(self.tails)

    def add_vertex(self, time: int, *, initial: bool = False, final: bool = False) -> int:
        self._check_mutable()
        vid = len(self.times)
        self.times.append(int(time))
        if initial:
            self.initials.add(vid)
        if final:
            self.finals.add(vid)
        return vid

    def add_edge(self, tail: int, head: int, ilabel: Any, olabel: Any,
                 weight: float | None = None) -> int:
        self._check_mutable()
        n = len(self.times)
        if not (0 <= tail < n and 0 <= head < n):
            raise ValueError(f"edge ({tail}, {head}) references a missing vertex")
        eid = len(self.tails)
        self.tails.append(tail)
        self.heads.append(head)
        self.ilabels.append(ilabel)
        self.olabels.append(olabel)
        self.weights.append(UNSCORED if weight is None else float(weight))
        return eid

    def _check_mutable(self) -> None:
        if self.sealed:
            raise GraphNotSealed("graph is sealed; build a new one instead")

    # -- sealing ----------------------------------------------------------

    def seal(self) -> "DecodingGraph":
        """Freeze the structure and precompute order, adjacency and levels."""
        if self.sealed:
            return self
        order = topological_order(self)
        nv, ne = self.num_vertices, self.num_edges
        self.times = np.asarray(self.times, dtype=np.int64)
        self.tails = np.asarray(self.tails, dtype=np.int64).reshape(ne)
        self.heads = np.asarray(self.heads, dtype=np.int64).reshape(ne)
        self.weights = np.asarray(self.weights, dtype=np.float64).reshape(ne)
        self.initials = frozenset(self.initials)
        self.finals = frozenset(self.finals)
        self.order = np.asarray(order, dtype=np.int64)

        # stable argsort keeps ascending edge ids inside each vertex bucket
        self.out_idx = np.argsort(self.tails, kind="stable")
        self.out_ptr = np.searchsorted(self.tails[self.out_idx], np.arange(nv + 1))
        self.in_idx = np.argsort(self.heads, kind="stable")
        self.in_ptr = np.searchsorted(self.heads[self.in_idx], np.arange(nv + 1))

        depth = np.zeros(nv, dtype=np.int64)
        for v in order:
            lo, hi = self.in_ptr[v], self.in_ptr[v + 1]
            if hi > lo:
                depth[v] = depth[self.tails[self.in_idx[lo:hi]]].max() + 1
        self.depth = depth
        nlev = int(depth.max()) + 1 if nv else 0
        head_depth = depth[self.heads]
        tail_depth = depth[self.tails]
        self._fwd_levels = [np.flatnonzero(head_depth == d) for d in range(1, nlev)]
        self._bwd_levels = [np.flatnonzero(tail_depth == d) for d in range(nlev - 1)]
        self._init_mask = np.zeros(nv, dtype=bool)
        self._init_mask[list(self.initials)] = True
        self._final_mask = np.zeros(nv, dtype=bool)
        self._final_mask[list(self.finals)] = True
        self.sealed = True
        return self

    def out_edges(self, v: int) -> np.ndarray:
        return self.out_idx[self.out_ptr[v]:self.out_ptr[v + 1]]

    def in_edges(self, v: int) -> np.ndarray:
        return self.in_idx[self.in_ptr[v]:self.in_ptr[v + 1]]

    def with_weights(self, weights: Sequence[float] | np.ndarray) -> "DecodingGraph":
        """A sealed view sharing this structure but carrying other weights."""
        self._require_sealed()
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (self.num_edges,):
            raise ValueError(f"expected {self.num_edges} weights, got shape {w.shape}")
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.weights = w
        return clone

    def _require_sealed(self) -> None:
        if not self.sealed:
            raise GraphNotSealed("seal() the graph before running passes over it")

    def subgraph(self, vertex_ids: Sequence[int], edge_ids: Sequence[int]) -> "DecodingGraph":
        """New sealed graph keeping the given ids (in the given order), re-densified."""
        vmap = {int(v): i for i, v in enumerate(vertex_ids)}
        sub = object.__new__(type(self))
        DecodingGraph.__init__(sub)
        for name in type(self)._vertex_fields:
            src = getattr(self, name)
            setattr(sub, name, [src[v] for v in vertex_ids])
        for name in type(self)._edge_fields:
            src = getattr(self, name)
            setattr(sub, name, [src[e] for e in edge_ids])
        sub.tails = [vmap[int(t)] for t in sub.tails]
        sub.heads = [vmap[int(h)] for h in sub.heads]
        sub.times = [int(t) for t in sub.times]
        sub.weights = [float(w) for w in sub.weights]
        sub.initials = {vmap[v] for v in self.initials if v in vmap}
        sub.finals = {vmap[v] for v in self.finals if v in vmap}
        for name in getattr(type(self), "_extra_fields", ()):
            setattr(sub, name, getattr(self, name))
        return sub.seal()

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(vertices={self.num_vertices}, edges={self.num_edges}, "
                f"initials={sorted(self.initials)}, finals={sorted(self.finals)})")


@dataclass(frozen=True)
class TrimMap:
    """Original ids of the vertices and edges that survived trimming."""

    vertices: tuple[int, ...]
    edges: tuple[int, ...]


def topological_order(g: DecodingGraph) -> list[int]:
    """Kahn's algorithm; ties broken by ascending vertex id."""
    n = g.num_vertices
    indeg = [0] * n
    succ: list[list[int]] = [[] for _ in range(n)]
    for t, h in zip(g.tails, g.heads):
        succ[int(t)].append(int(h))
        indeg[int(h)] += 1
    heap = [v for v in range(n) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for h in succ[v]:
            indeg[h] -= 1
            if indeg[h] == 0:
                heapq.heappush(heap, h)
    if len(order) != n:
        raise CycleDetected(f"graph has a cycle through {n - len(order)} vertices")
    return order


def _resolve_weights(g: DecodingGraph, weights) -> np.ndarray:
    g._require_sealed()
    w = g.weights if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (g.num_edges,):
        raise ValueError(f"expected {g.num_edges} weights, got shape {w.shape}")
    if np.isnan(w).any():
        raise UnscoredEdge(f"{int(np.isnan(w).sum())} edge(s) carry no weight")
    return w


def forward_scores(g: DecodingGraph, weights=None) -> np.ndarray:
    """alpha(v): best partial-path score from any initial vertex to v."""
    w = _resolve_weights(g, weights)
    alpha = np.where(g._init_mask, 0.0, NEG_INF)
    for edges in g._fwd_levels:
        np.maximum.at(alpha, g.heads[edges], alpha[g.tails[edges]] + w[edges])
    return alpha


def backward_scores(g: DecodingGraph, weights=None) -> np.ndarray:
    """beta(v): best suffix-path score from v to any final vertex."""
    w = _resolve_weights(g, weights)
    beta = np.where(g._final_mask, 0.0, NEG_INF)
    for edges in reversed(g._bwd_levels):
        np.maximum.at(beta, g.tails[edges], beta[g.heads[edges]] + w[edges])
    return beta


def path_score(g: DecodingGraph, path: Path | Iterable[int], weights=None) -> float:
    w = _resolve_weights(g, weights)
    total = 0.0
    for e in path:
        total += float(w[e])
    return total


def best_path(g: DecodingGraph, weights=None, beta: np.ndarray | None = None) -> tuple[Path, float]:
    """Highest-scoring non-empty initial-to-final path.

    Among tied paths the one with the lexicographically smallest edge-id
    sequence wins: the trace runs forward along beta and takes the lowest
    edge id among the best continuations, stopping at a final vertex when
    stopping is no worse than continuing.
    """
    w = _resolve_weights(g, weights)
    if beta is None:
        beta = backward_scores(g, w)
    # first edge: best over all edges leaving an initial vertex
    first_best, first_edge = NEG_INF, -1
    for v in sorted(g.initials):
        for e in g.out_edges(v):
            cand = w[e] + beta[g.heads[e]]
            if cand > first_best or (cand == first_best and first_edge >= 0 and e < first_edge):
                first_best, first_edge = cand, int(e)
    if first_edge < 0 or first_best == NEG_INF:
        raise NoPath("no initial-to-final path")
    edges = [first_edge]
    v = int(g.heads[first_edge])
    while True:
        outs = g.out_edges(v)
        cont = NEG_INF
        pick = -1
        if len(outs):
            cands = w[outs] + beta[g.heads[outs]]
            k = int(np.argmax(cands))
            cont, pick = cands[k], int(outs[k])
        if v in g.finals and cont <= 0.0:
            break
        if pick < 0 or cont == NEG_INF:
            break
        edges.append(pick)
        v = int(g.heads[pick])
    path = Path(tuple(edges))
    return path, path_score(g, path, w)


def enumerate_paths(g: DecodingGraph, cap: int = 10_000, weights=None) -> list[tuple[Path, float]]:
    """Every non-empty initial-to-final path with its exact score (test oracle)."""
    w = _resolve_weights(g, weights)
    out: list[tuple[Path, float]] = []
    stack: list[int] = []

    def visit(v: int, score: float) -> None:
        for e in g.out_edges(v):
            e = int(e)
            stack.append(e)
            s = score + float(w[e])
            h = int(g.heads[e])
            if h in g.finals:
                if len(out) >= cap:
                    raise TooManyPaths(f"more than {cap} paths")
                out.append((Path(tuple(stack)), s))
            visit(h, s)
            stack.pop()

    for v in sorted(g.initials):
        visit(v, 0.0)
    return out


def trim(g: DecodingGraph) -> tuple[DecodingGraph, TrimMap]:
    """Keep only what is reachable from I and co-reachable to F."""
    n = g.num_vertices
    succ: list[list[int]] = [[] for _ in range(n)]
    pred: list[list[int]] = [[] for _ in range(n)]
    for t, h in zip(g.tails, g.heads):
        succ[int(t)].append(int(h))
        pred[int(h)].append(int(t))
    fwd = _reach(g.initials, succ, n)
    bwd = _reach(g.finals, pred, n)
    alive = fwd & bwd
    vkeep = [v for v in range(n) if alive[v]]
    ekeep = [e for e in range(g.num_edges) if alive[int(g.tails[e])] and alive[int(g.heads[e])]]
    return g.subgraph(vkeep, ekeep), TrimMap(tuple(vkeep), tuple(ekeep))


def _reach(seeds: Iterable[int], adj: list[list[int]], n: int) -> np.ndarray:
    seen = np.zeros(n, dtype=bool)
    todo = list(seeds)
    for v in todo:
        seen[v] = True
    while todo:
        v = todo.pop()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                todo.append(u)
    return seen
