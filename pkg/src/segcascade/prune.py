"""Max-marginal pruning of decoding graphs into lattices."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import AllPruned, NoPath
from .graph import EPS, DecodingGraph, backward_scores, current_label, forward_scores, trim

# kept edges must satisfy gamma >= tau - slack; absorbs rounding between the
# alpha + w + beta sums of different edges on one path
REL_SLACK = 1e-9


@dataclass
class PruneReport:
    lam: float
    threshold: float
    kept_edges: int
    total_edges: int
    density: float | None = None
    oracle_error: float | None = None
    uid: str | None = None

    def to_json(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d


def max_marginals(g: DecodingGraph, weights=None) -> np.ndarray:
    """gamma(e) = alpha(tail) + w(e) + beta(head); -inf off every accepting path."""
    w = g.weights if weights is None else np.asarray(weights, dtype=np.float64)
    alpha = forward_scores(g, w)
    beta = backward_scores(g, w)
    gamma = alpha[g.tails] + w + beta[g.heads]
    if not np.isfinite(gamma).any():
        raise NoPath("no initial-to-final path")
    return gamma


def threshold(gammas: np.ndarray, best_score: float, lam: float) -> float:
    """(1 - lam) * mean of finite max-marginals + lam * best score."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    finite = np.asarray(gammas)[np.isfinite(gammas)]
    if finite.size == 0:
        raise AllPruned("no edge lies on an accepting path")
    if lam == 1.0:
        return float(best_score)
    return (1.0 - lam) * math.fsum(finite) / finite.size + lam * best_score


def keep_mask(gammas: np.ndarray, tau: float) -> np.ndarray:
    slack = REL_SLACK * max(1.0, abs(tau))
    return np.isfinite(gammas) & (gammas >= tau - slack)


def prune_to_lattice(g: DecodingGraph, lam: float, weights=None) -> tuple[DecodingGraph, PruneReport]:
    """Drop edges whose max-marginal falls below the interpolated threshold.

    The result is trimmed and keeps the weights it was pruned with; its
    ``source_edges`` attribute lists the original id of every kept edge.
    """
    w = g.weights if weights is None else np.asarray(weights, dtype=np.float64)
    gamma = max_marginals(g, w)
    best = float(np.max(gamma[np.isfinite(gamma)]))
    tau = threshold(gamma, best, lam)
    keep = np.flatnonzero(keep_mask(gamma, tau))
    scored = g.with_weights(w)
    sub = scored.subgraph(range(g.num_vertices), keep)
    lattice, tmap = trim(sub)
    lattice.source_edges = tuple(int(keep[e]) for e in tmap.edges)
    report = PruneReport(lam=lam, threshold=tau, kept_edges=lattice.num_edges,
                         total_edges=g.num_edges)
    return lattice, report


def oracle_edit_distance(g: DecodingGraph, ref: Sequence[int],
                         collapse: Mapping[int, int] | None = None) -> int:
    """Minimum edit distance between any path's label sequence and ``ref``.

    Dynamic program over (vertex, reference position) in topological order;
    epsilon edges cost nothing and emit nothing.
    """
    if not g.sealed:
        g.seal()
    cmap = (lambda s: collapse[s]) if collapse is not None else (lambda s: s)
    ref = [cmap(s) for s in ref]
    n = len(ref)
    big = 1 << 30
    cost = np.full((g.num_vertices, n + 1), big, dtype=np.int64)
    for v in g.initials:
        cost[v, 0] = 0
    refa = np.asarray(ref, dtype=np.int64)
    for v in g.order:
        row = cost[v]
        for j in range(1, n + 1):  # deletions of reference tokens
            if row[j - 1] + 1 < row[j]:
                row[j] = row[j - 1] + 1
        for e in g.out_edges(v):
            h = int(g.heads[e])
            lab = current_label(g.olabels[e])
            if g.ilabels[e] == EPS or lab == EPS:
                np.minimum(cost[h], row, out=cost[h])
                continue
            lab = cmap(lab)
            cand = row + 1  # insertion of the hypothesis token
            if n:
                diag = row[:-1] + (refa != lab)
                cand[1:] = np.minimum(cand[1:], diag)
            np.minimum(cost[h], cand, out=cost[h])
    finals = [int(cost[f, n]) for f in g.finals]
    best = min(finals) if finals else big
    if best >= big:
        raise NoPath("lattice has no accepting path")
    return best


def lattice_metrics(lattice: DecodingGraph, gold_labels: Sequence[int],
                    collapse: Mapping[int, int] | None = None) -> tuple[float, float]:
    """(density, oracle error rate) of a lattice against a gold label sequence."""
    n = len(gold_labels)
    if n == 0:
        raise ValueError("gold segmentation is empty")
    density = lattice.num_edges / n
    return density, oracle_edit_distance(lattice, gold_labels, collapse) / n
