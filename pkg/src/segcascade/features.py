"""Edge features, lexicalization and linear scoring.

Every template produces a small *base* vector from the frame scores (or
from an edge attribute) and is then lexicalized: the base vector is placed
in the block selected by the edge's label (first order) or label pair
(second order).  The feature index layout is template-major,
lexicalization-block-minor, and is fixed by :class:`FeatureLayout`.

Two routes compute the same thing.  :func:`extract` builds one sparse
vector per edge and is the reference.  :class:`FeatureTable` memoizes base
rows per graph (rows are shared between edges with the same span) and
scores every edge with one matrix product per template; training uses it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptySpan, LabelOutOfRange, MissingAttribute
from .graph import EPS, DecodingGraph, current_label


# ---------------------------------------------------------------------------
# sparse vectors


@dataclass(frozen=True)
class SparseFeatureVector:
    """Sorted unique indices with nonzero values in a space of size ``dim``."""

    indices: np.ndarray
    values: np.ndarray
    dim: int

    def __post_init__(self) -> None:
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        keep = val != 0.0
        idx, val = idx[keep], val[keep]
        if idx.size:
            order = np.argsort(idx, kind="stable")
            idx, val = idx[order], val[order]
            if np.any(np.diff(idx) == 0):
                raise ValueError("duplicate indices in sparse vector")
            if idx[0] < 0 or idx[-1] >= self.dim:
                raise DimensionMismatch(f"index out of range for dimension {self.dim}")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, x: Sequence[float] | np.ndarray) -> "SparseFeatureVector":
        x = np.asarray(x, dtype=np.float64)
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.size)

    @classmethod
    def from_dict(cls, entries: Mapping[int, float], dim: int) -> "SparseFeatureVector":
        keys = sorted(entries)
        return cls(np.array(keys, dtype=np.int64), np.array([entries[k] for k in keys]), dim)

    @classmethod
    def zeros(cls, dim: int) -> "SparseFeatureVector":
        return cls(np.zeros(0, np.int64), np.zeros(0), dim)

    @property
    def entries(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def __len__(self) -> int:
        return int(self.indices.size)

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def dot(self, theta: np.ndarray) -> float:
        if len(theta) != self.dim:
            raise DimensionMismatch(f"theta has {len(theta)} entries, vector has dim {self.dim}")
        return float(np.dot(theta[self.indices], self.values))

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def shifted(self, offset: int, dim: int) -> "SparseFeatureVector":
        return SparseFeatureVector(self.indices + offset, self.values, dim)

    def __add__(self, other: "SparseFeatureVector") -> "SparseFeatureVector":
        if other.dim != self.dim:
            raise DimensionMismatch(f"{self.dim} vs {other.dim}")
        return SparseFeatureVector.from_dense(self.to_dense() + other.to_dense())

    def __sub__(self, other: "SparseFeatureVector") -> "SparseFeatureVector":
        if other.dim != self.dim:
            raise DimensionMismatch(f"{self.dim} vs {other.dim}")
        return SparseFeatureVector.from_dense(self.to_dense() - other.to_dense())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SparseFeatureVector):
            return NotImplemented
        return (self.dim == other.dim and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))


def lexicalize(phi: SparseFeatureVector, label_indices: Sequence[int],
               label_count: int) -> SparseFeatureVector:
    """phi (x) 1_{s1} (x) 1_{s2} ...: move phi into the block of the label tuple."""
    block = 0
    for s in label_indices:
        if not 0 <= s < label_count:
            raise LabelOutOfRange(f"label id {s} outside [0, {label_count})")
        block = block * label_count + s
    n = len(label_indices)
    return SparseFeatureVector(phi.indices + block * phi.dim, phi.values,
                               phi.dim * label_count ** n)


# ---------------------------------------------------------------------------
# frame scores and base extractors


@dataclass
class FrameScores:
    """T x K matrix of per-frame label scores (log-probabilities by default)."""

    matrix: np.ndarray
    log_probs: bool = True

    def __post_init__(self) -> None:
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] < 1:
            raise ValueError("frame scores must be a non-empty T x K matrix")
        if not np.all(np.isfinite(self.matrix)):
            raise ValueError("frame scores must be finite")
        self._cum = None

    @property
    def num_frames(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_labels(self) -> int:
        return self.matrix.shape[1]

    def check_normalized(self, tol: float = 1e-3) -> bool:
        """Warn (never raise) when log-prob rows do not exponentiate to one."""
        if not self.log_probs:
            return True
        mx = self.matrix.max(axis=1, keepdims=True)
        lse = (mx + np.log(np.exp(self.matrix - mx).sum(axis=1, keepdims=True))).ravel()
        bad = np.abs(lse) > tol
        if bad.any():
            warnings.warn(f"{int(bad.sum())} frame row(s) are not log-normalized", stacklevel=2)
            return False
        return True

    def cumulative(self) -> np.ndarray:
        if self._cum is None:
            cum = np.zeros((self.num_frames + 1, self.num_labels))
            np.cumsum(self.matrix, axis=0, out=cum[1:])
            self._cum = cum
        return self._cum


def _check_span(fs: FrameScores, start: int, end: int) -> None:
    if not 0 <= start < end <= fs.num_frames:
        raise EmptySpan(f"span [{start}, {end}) is empty or outside [0, {fs.num_frames}]")


def avg_frame_scores(fs: FrameScores, start: int, end: int) -> np.ndarray:
    _check_span(fs, start, end)
    return fs.matrix[start:end].mean(axis=0)


def sample_offsets(length: int) -> tuple[int, int, int]:
    """Middle frames of three equal sub-segments: floor((2k+1) L / 6)."""
    return tuple(((2 * k + 1) * length) // 6 for k in range(3))


def sample_frame_scores(fs: FrameScores, start: int, end: int) -> np.ndarray:
    _check_span(fs, start, end)
    rows = [start + off for off in sample_offsets(end - start)]
    return fs.matrix[rows].ravel()


def boundary_scores(fs: FrameScores, start: int, end: int,
                    offsets: Sequence[int] = (1, 2, 3)) -> np.ndarray:
    """Rows i frames before the left and after the right boundary, clamped."""
    last = fs.num_frames - 1
    left = [min(max(start - i, 0), last) for i in offsets]
    right = [min(max(end + i, 0), last) for i in offsets]
    return fs.matrix[left + right].ravel()


def length_indicator(start: int, end: int, max_len: int) -> np.ndarray:
    out = np.zeros(max_len + 1)
    out[min(end - start, max_len)] = 1.0
    return out


# ---------------------------------------------------------------------------
# templates and layout

LEX_NONE, LEX_LABEL, LEX_PAIR = "none", "label", "pair"
_LEX_ORDER = {LEX_NONE: 0, LEX_LABEL: 1, LEX_PAIR: 2}
_SPAN_KINDS = ("avg", "samples", "boundary", "length")


@dataclass(frozen=True)
class FeatureTemplate:
    """A base extractor plus its lexicalization context.

    ``kind`` is one of avg, samples, boundary, length, bias, attr.  Attribute
    templates read ``attr`` from the edge context and are never lexicalized.
    """

    name: str
    kind: str
    lex: str = LEX_LABEL
    attr: str | None = None
    offsets: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self) -> None:
        if self.kind not in _SPAN_KINDS + ("bias", "attr"):
            raise ValueError(f"unknown template kind {self.kind!r}")
        if self.lex not in _LEX_ORDER:
            raise ValueError(f"unknown lexicalization {self.lex!r}")
        if self.kind == "attr" and (self.attr is None or self.lex != LEX_NONE):
            raise ValueError("attribute templates need an attr name and no lexicalization")

    @property
    def order(self) -> int:
        return _LEX_ORDER[self.lex]

    def base_dim(self, num_labels: int, max_len: int) -> int:
        return {
            "avg": num_labels,
            "samples": 3 * num_labels,
            "boundary": 2 * len(self.offsets) * num_labels,
            "length": max_len + 1,
            "bias": 1,
            "attr": 1,
        }[self.kind]


@dataclass(frozen=True)
class EdgeContext:
    """What a template may look at for one edge.

    ``start is None`` marks an epsilon move (no segment): only attribute
    templates fire on it.
    """

    start: int | None
    end: int | None
    label: int = EPS
    history: int = EPS
    attrs: Mapping[str, float] = field(default_factory=dict)

    @property
    def is_epsilon(self) -> bool:
        return self.start is None


def base_vector(t: FeatureTemplate, fs: FrameScores | None, ctx: EdgeContext,
                max_len: int) -> np.ndarray | None:
    """Unlexicalized template output, or None when the template is inactive."""
    if t.kind == "attr":
        if t.attr not in ctx.attrs:
            raise MissingAttribute(f"template {t.name!r} needs edge attribute {t.attr!r}")
        return np.array([float(ctx.attrs[t.attr])])
    if ctx.is_epsilon:
        return None
    if t.lex == LEX_PAIR and ctx.history == EPS:
        return None
    if t.kind == "bias":
        return np.ones(1)
    if t.kind == "length":
        return length_indicator(ctx.start, ctx.end, max_len)
    if fs is None:
        raise MissingAttribute(f"template {t.name!r} needs frame scores")
    if t.kind == "avg":
        return avg_frame_scores(fs, ctx.start, ctx.end)
    if t.kind == "samples":
        return sample_frame_scores(fs, ctx.start, ctx.end)
    return boundary_scores(fs, ctx.start, ctx.end, t.offsets)


def lex_labels(t: FeatureTemplate, ctx: EdgeContext) -> tuple[int, ...]:
    if t.lex == LEX_NONE:
        return ()
    if t.lex == LEX_LABEL:
        return (ctx.label,)
    return (ctx.history, ctx.label)


class FeatureLayout:
    """Template list with prefix-sum offsets; total dim = sum base_dim * K^order."""

    def __init__(self, templates: Sequence[FeatureTemplate], num_labels: int, max_len: int):
        names = [t.name for t in templates]
        if len(set(names)) != len(names):
            raise ValueError("template names must be unique")
        self.templates = tuple(templates)
        self.num_labels = num_labels
        self.max_len = max_len
        self.base_dims = [t.base_dim(num_labels, max_len) for t in self.templates]
        self.blocks = [num_labels ** t.order for t in self.templates]
        sizes = [d * b for d, b in zip(self.base_dims, self.blocks)]
        self.offsets = [int(x) for x in np.concatenate([[0], np.cumsum(sizes)[:-1]])] if sizes else []
        self.dim = int(sum(sizes))

    def index_of(self, name: str) -> int:
        for i, t in enumerate(self.templates):
            if t.name == name:
                return i
        raise KeyError(name)

    def manifest(self) -> list[tuple[str, int, str, int, int]]:
        return [(t.name, t.order, t.lex, d, o)
                for t, d, o in zip(self.templates, self.base_dims, self.offsets)]

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, FeatureLayout) and self.templates == other.templates
                and self.num_labels == other.num_labels and self.max_len == other.max_len)


@dataclass
class Model:
    layout: FeatureLayout
    theta: np.ndarray

    @classmethod
    def zeros(cls, layout: FeatureLayout) -> "Model":
        return cls(layout, np.zeros(layout.dim))

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (self.layout.dim,):
            raise DimensionMismatch(f"theta has shape {self.theta.shape}, layout dim {self.layout.dim}")


def extract(layout: FeatureLayout, fs: FrameScores | None, ctx: EdgeContext) -> SparseFeatureVector:
    parts_idx, parts_val = [], []
    for t, off in zip(layout.templates, layout.offsets):
        base = base_vector(t, fs, ctx, layout.max_len)
        if base is None:
            continue
        lex = lexicalize(SparseFeatureVector.from_dense(base), lex_labels(t, ctx), layout.num_labels)
        parts_idx.append(lex.indices + off)
        parts_val.append(lex.values)
    if not parts_idx:
        return SparseFeatureVector.zeros(layout.dim)
    return SparseFeatureVector(np.concatenate(parts_idx), np.concatenate(parts_val), layout.dim)


def score_edge(model: Model, phi: SparseFeatureVector) -> float:
    return phi.dot(model.theta)


# ---------------------------------------------------------------------------
# per-graph contexts and the vectorized table


def graph_contexts(g: DecodingGraph, attrs: Mapping[str, Sequence[float]] | None = None) -> list[EdgeContext]:
    """Edge contexts read off a graph's own times and labels.

    An edge with epsilon input is an epsilon move.  Pair output labels give
    (history, label); plain output labels give the label with no history.
    ``attrs`` maps attribute names to per-edge value arrays.
    """
    return EdgeArrays.from_graph(g, attrs).contexts()


@dataclass
class EdgeArrays:
    """Columnar edge contexts; ``start == -1`` marks an epsilon move."""

    start: np.ndarray
    end: np.ndarray
    label: np.ndarray
    history: np.ndarray
    attrs: dict[str, np.ndarray] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.start)

    @property
    def epsilon(self) -> np.ndarray:
        return self.start < 0

    @classmethod
    def from_graph(cls, g: DecodingGraph, attrs: Mapping[str, Sequence[float]] | None = None) -> "EdgeArrays":
        ne = g.num_edges
        label = np.fromiter((current_label(o) for o in g.olabels), dtype=np.int64, count=ne)
        hist = np.fromiter((o[0] if isinstance(o, tuple) else EPS for o in g.olabels),
                           dtype=np.int64, count=ne)
        ilab = np.fromiter((EPS if i == EPS else 0 for i in g.ilabels), dtype=np.int64, count=ne)
        eps = (ilab == EPS) | (label == EPS)
        times = np.asarray(g.times, dtype=np.int64)
        start = np.where(eps, -1, times[np.asarray(g.tails, dtype=np.int64)] if ne else 0)
        end = np.where(eps, -1, times[np.asarray(g.heads, dtype=np.int64)] if ne else 0)
        label = np.where(eps, EPS, label)
        hist = np.where(eps, EPS, hist)
        a = {k: np.asarray(v, dtype=np.float64) for k, v in (attrs or {}).items()}
        return cls(start.astype(np.int64), end.astype(np.int64), label, hist, a)

    @classmethod
    def from_contexts(cls, ctxs: Sequence[EdgeContext]) -> "EdgeArrays":
        keys = set().union(*(c.attrs.keys() for c in ctxs)) if ctxs else set()
        attrs = {}
        for k in keys:
            if any(k not in c.attrs for c in ctxs):
                continue  # reported lazily by the template that needs it
            attrs[k] = np.array([float(c.attrs[k]) for c in ctxs])
        return cls(np.array([-1 if c.is_epsilon else c.start for c in ctxs], dtype=np.int64),
                   np.array([-1 if c.is_epsilon else c.end for c in ctxs], dtype=np.int64),
                   np.array([c.label for c in ctxs], dtype=np.int64),
                   np.array([c.history for c in ctxs], dtype=np.int64), attrs)

    def contexts(self) -> list[EdgeContext]:
        out = []
        for e in range(len(self)):
            a = {k: float(v[e]) for k, v in self.attrs.items()}
            if self.start[e] < 0:
                out.append(EdgeContext(None, None, EPS, EPS, a))
            else:
                out.append(EdgeContext(int(self.start[e]), int(self.end[e]),
                                       int(self.label[e]), int(self.history[e]), a))
        return out


def composed_attrs(g: DecodingGraph) -> dict[str, np.ndarray]:
    """Lattice-score and LM-score attributes of a composed graph's edges."""
    if not hasattr(g, "left_weight"):
        return {}
    return {"lattice": np.asarray(g.left_weight, dtype=np.float64),
            "lm": np.asarray(g.right_weight, dtype=np.float64)}


class FeatureTable:
    """Memoized features of every edge of one graph.

    For each template: unique base rows (``rows``), the row of each edge
    (``row_of``) and its lexicalization block (``lex_of``, -1 when the
    template is inactive on that edge).
    """

    def __init__(self, layout: FeatureLayout, fs: FrameScores | None,
                 edges: EdgeArrays | Sequence[EdgeContext]):
        if not isinstance(edges, EdgeArrays):
            edges = EdgeArrays.from_contexts(edges)
        self.layout = layout
        self.num_edges = n = len(edges)
        self.rows: list[np.ndarray] = []
        self.row_of: list[np.ndarray] = []
        self.lex_of: list[np.ndarray] = []
        k = layout.num_labels
        eps = edges.epsilon
        live = ~eps
        if np.any(live & ((edges.label < 0) | (edges.label >= k))):
            raise LabelOutOfRange(f"edge label outside [0, {k})")
        for t, d in zip(layout.templates, layout.base_dims):
            if t.kind == "attr":
                if t.attr not in edges.attrs:
                    raise MissingAttribute(f"template {t.name!r} needs edge attribute {t.attr!r}")
                vals = edges.attrs[t.attr]
                uniq, inv = np.unique(vals, return_inverse=True)
                self.rows.append(uniq[:, None].astype(np.float64))
                self.row_of.append(inv.reshape(n).astype(np.int64))
                self.lex_of.append(np.zeros(n, dtype=np.int64))
                continue
            active = live.copy()
            if t.lex == LEX_PAIR:
                active &= edges.history != EPS
                if np.any(active & (edges.history >= k)):
                    raise LabelOutOfRange(f"history label outside [0, {k})")
            if t.lex == LEX_NONE:
                lex = np.zeros(n, dtype=np.int64)
            elif t.lex == LEX_LABEL:
                lex = edges.label.copy()
            else:
                lex = edges.history * k + edges.label
            lex[~active] = -1
            if t.kind == "bias":
                key = np.zeros(n, dtype=np.int64)
            elif t.kind == "length":
                key = edges.end - edges.start
            else:
                key = edges.start * (int(edges.end.max(initial=0)) + 1) + edges.end
            row_of = np.zeros(n, dtype=np.int64)
            if active.any():
                uniq, first, inv = np.unique(key[active], return_index=True, return_inverse=True)
                row_of[active] = inv.reshape(-1)
                src = np.flatnonzero(active)[first]
                rows = _base_rows(t, fs, edges.start[src], edges.end[src], d, layout.max_len)
            else:
                rows = np.zeros((0, d))
            self.rows.append(rows)
            self.row_of.append(row_of)
            self.lex_of.append(lex)

    @classmethod
    def for_graph(cls, layout: FeatureLayout, fs: FrameScores | None, g: DecodingGraph) -> "FeatureTable":
        return cls(layout, fs, EdgeArrays.from_graph(g, composed_attrs(g)))

    def scores(self, theta: np.ndarray) -> np.ndarray:
        """theta . phi(e) for every edge."""
        if len(theta) != self.layout.dim:
            raise DimensionMismatch(f"theta has {len(theta)} entries, layout dim {self.layout.dim}")
        out = np.zeros(self.num_edges)
        for rows, row_of, lex_of, off, d, nb in zip(self.rows, self.row_of, self.lex_of,
                                                  self.layout.offsets, self.layout.base_dims,
                                                  self.layout.blocks):
            active = lex_of >= 0
            if not active.any():
                continue
            w = theta[off:off + d * nb].reshape(nb, d)
            m = rows @ w.T
            out[active] += m[row_of[active], lex_of[active]]
        return out

    def dense_sum(self, edges: Iterable[int]) -> np.ndarray:
        """phi summed over a set of edges, as a dense vector."""
        out = np.zeros(self.layout.dim)
        edges = np.fromiter(edges, dtype=np.int64)
        for rows, row_of, lex_of, off, d in zip(self.rows, self.row_of, self.lex_of,
                                              self.layout.offsets, self.layout.base_dims):
            lex = lex_of[edges]
            act = lex >= 0
            for r, b in zip(row_of[edges][act], lex[act]):
                s = off + b * d
                out[s:s + d] += rows[r]
        return out

    def edge_vector(self, e: int) -> SparseFeatureVector:
        return SparseFeatureVector.from_dense(self.dense_sum([e]))


def _row_key(t: FeatureTemplate, ctx: EdgeContext):
    if t.kind == "attr":
        if t.attr not in ctx.attrs:
            raise MissingAttribute(f"template {t.name!r} needs edge attribute {t.attr!r}")
        return ("attr", float(ctx.attrs[t.attr]))
    if ctx.is_epsilon or (t.lex == LEX_PAIR and ctx.history == EPS):
        return None
    if t.kind == "bias":
        return 0
    if t.kind == "length":
        return ctx.end - ctx.start
    return (ctx.start, ctx.end)


def _base_rows(t: FeatureTemplate, fs: FrameScores | None, starts: np.ndarray, ends: np.ndarray,
               d: int, max_len: int) -> np.ndarray:
    n = len(starts)
    if t.kind == "bias":
        return np.ones((n, 1))
    lengths = ends - starts
    if t.kind == "length":
        out = np.zeros((n, max_len + 1))
        out[np.arange(n), np.minimum(lengths, max_len)] = 1.0
        return out
    if fs is None:
        raise MissingAttribute(f"template {t.name!r} needs frame scores")
    if np.any(starts < 0) or np.any(lengths <= 0) or np.any(ends > fs.num_frames):
        raise EmptySpan("a span is empty or outside the utterance")
    m = fs.matrix
    if t.kind == "avg":
        cum = fs.cumulative()
        return (cum[ends] - cum[starts]) / lengths[:, None]
    if t.kind == "samples":
        idx = starts[:, None] + ((2 * np.arange(3) + 1)[None, :] * lengths[:, None]) // 6
        return m[idx].reshape(n, -1)
    offs = np.asarray(t.offsets, dtype=np.int64)
    last = fs.num_frames - 1
    left = np.clip(starts[:, None] - offs[None, :], 0, last)
    right = np.clip(ends[:, None] + offs[None, :], 0, last)
    return m[np.concatenate([left, right], axis=1)].reshape(n, -1)


# ---------------------------------------------------------------------------
# template sets


def first_level_templates() -> list[FeatureTemplate]:
    """Averages, samples, boundaries, length and bias lexicalized by label, plus a zeroth-order bias."""
    return [
        FeatureTemplate("avg", "avg"),
        FeatureTemplate("samples", "samples"),
        FeatureTemplate("boundary", "boundary"),
        FeatureTemplate("length", "length"),
        FeatureTemplate("bias", "bias"),
        FeatureTemplate("bias0", "bias", lex=LEX_NONE),
    ]


def second_level_templates() -> list[FeatureTemplate]:
    """Lattice score, LM score, label-pair boundaries, first-order length and bias."""
    return [
        FeatureTemplate("lattice_score", "attr", lex=LEX_NONE, attr="lattice"),
        FeatureTemplate("lm_score", "attr", lex=LEX_NONE, attr="lm"),
        FeatureTemplate("boundary2", "boundary", lex=LEX_PAIR),
        FeatureTemplate("length", "length"),
        FeatureTemplate("bias", "bias"),
    ]


TEMPLATE_SETS = {
    "level1": first_level_templates,
    "level2": second_level_templates,
}


def template_set(name: str) -> list[FeatureTemplate]:
    try:
        return TEMPLATE_SETS[name]()
    except KeyError:
        raise ValueError(f"unknown template set {name!r}; known: {sorted(TEMPLATE_SETS)}") from None


class LazyScorer:
    """theta . phi for edges met one at a time (lazy composition in beam search).

    Caches the per-block scores of each distinct base row, so an edge costs
    one dictionary lookup per template after its span has been seen once.
    """

    def __init__(self, layout: FeatureLayout, fs: FrameScores | None, theta: np.ndarray):
        if len(theta) != layout.dim:
            raise DimensionMismatch(f"theta has {len(theta)} entries, layout dim {layout.dim}")
        self.layout = layout
        self.fs = fs
        self._w = [theta[o:o + d * b].reshape(b, d)
                   for o, d, b in zip(layout.offsets, layout.base_dims, layout.blocks)]
        self._cache: list[dict[Any, np.ndarray]] = [{} for _ in layout.templates]

    def __call__(self, ctx: EdgeContext) -> float:
        total = 0.0
        k = self.layout.num_labels
        for i, t in enumerate(self.layout.templates):
            key = _row_key(t, ctx)
            if key is None:
                continue
            m = self._cache[i].get(key)
            if m is None:
                base = base_vector(t, self.fs, ctx, self.layout.max_len)
                m = self._cache[i][key] = self._w[i] @ base
            block = 0
            for s in lex_labels(t, ctx):
                block = block * k + s
            total += float(m[block])
        return total
