"""Full segmental hypothesis space and bigram label-model graphs."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyCorpus, LabelOutOfRange, MissingUnigram
from .graph import EPS, DecodingGraph

EPS_NAME = "<eps>"
BOS_NAME = "<s>"
EOS_NAME = "</s>"


@dataclass(frozen=True)
class LabelSet:
    """Ordered label names with dense ids; epsilon is id -1 and never stored."""

    names: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")
        if EPS_NAME in self.names:
            raise ValueError(f"{EPS_NAME} is reserved for the empty label")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.names)})

    @classmethod
    def from_names(cls, names: Iterable[str], sentence_markers: bool = False) -> "LabelSet":
        names = list(names)
        if sentence_markers:
            names += [m for m in (BOS_NAME, EOS_NAME) if m not in names]
        return cls(tuple(names))

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        if name == EPS_NAME:
            return EPS
        try:
            return self._index[name]
        except KeyError:
            raise LabelOutOfRange(f"unknown label {name!r}") from None

    def name(self, idx: int) -> str:
        if idx == EPS:
            return EPS_NAME
        if not 0 <= idx < len(self.names):
            raise LabelOutOfRange(f"label id {idx} outside [0, {len(self.names)})")
        return self.names[idx]


@dataclass(frozen=True)
class SegmentationConfig:
    max_segment_frames: int = 30
    min_segment_frames: int = 1

    def __post_init__(self) -> None:
        if not 1 <= self.min_segment_frames <= self.max_segment_frames:
            raise ValueError("need 1 <= min_segment_frames <= max_segment_frames")


def full_space_edge_count(num_frames: int, num_labels: int, cfg: SegmentationConfig) -> int:
    return num_labels * sum(max(0, num_frames - ell + 1)
                            for ell in range(cfg.min_segment_frames, cfg.max_segment_frames + 1))


def build_full_space(num_frames: int, labels: LabelSet | int,
                     cfg: SegmentationConfig = SegmentationConfig()) -> DecodingGraph:
    """Every segmentation of [0, T) with every label on every segment.

    Edges are appended start-major, then by length, then by label, so edge
    ids grow with (start, length, label).
    """
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    k = labels if isinstance(labels, int) else len(labels)
    g = DecodingGraph()
    for t in range(num_frames + 1):
        g.add_vertex(t, initial=(t == 0), final=(t == num_frames))
    for start in range(num_frames):
        for ell in range(cfg.min_segment_frames, cfg.max_segment_frames + 1):
            end = start + ell
            if end > num_frames:
                break
            for s in range(k):
                g.add_edge(start, end, s, s)
    return g.seal()


@dataclass
class BigramLM:
    """Bigram log-probabilities with a per-history backoff weight.

    Keys are label ids.  ``bigram[(s1, s2)] = log p(s2 | s1)``,
    ``backoff[s1]`` is the log weight of leaving history s1 through the
    backoff state and ``unigram[s]`` is log p(s).
    """

    bigram: dict[tuple[int, int], float] = field(default_factory=dict)
    backoff: dict[int, float] = field(default_factory=dict)
    unigram: dict[int, float] = field(default_factory=dict)

    def transition_options(self, s1: int, s2: int) -> list[float]:
        """Log scores of every route from history s1 to label s2."""
        opts = []
        if (s1, s2) in self.bigram:
            opts.append(self.bigram[(s1, s2)])
        if s1 in self.backoff and s2 in self.unigram:
            opts.append(self.backoff[s1] + self.unigram[s2])
        return opts


@dataclass(frozen=True)
class SmoothingConfig:
    """Add-k bigram smoothing with an absolute discount feeding the backoff mass.

    ``backoff_floor`` keeps every backoff weight finite so that unseen
    bigrams always have a route, even when the smoothed table already sums
    to one.
    """

    k: float = 0.0
    discount: float = 0.0
    unigram_k: float = 1.0
    backoff_floor: float = 1e-7


def estimate_bigram_lm(transcripts: Sequence[Sequence[int]], num_labels: int,
                       smoothing: SmoothingConfig = SmoothingConfig()) -> BigramLM:
    if not transcripts or not any(len(t) for t in transcripts):
        raise EmptyCorpus("cannot estimate an LM from an empty corpus")
    k, d = smoothing.k, smoothing.discount
    uni = Counter()
    big = Counter()
    hist = Counter()
    for seq in transcripts:
        for s in seq:
            if not 0 <= s < num_labels:
                raise LabelOutOfRange(f"label id {s} outside [0, {num_labels})")
        uni.update(seq)
        for s1, s2 in zip(seq, seq[1:]):
            big[(s1, s2)] += 1
            hist[s1] += 1

    lm = BigramLM()
    n_tok = sum(uni.values())
    uk = smoothing.unigram_k
    for s in range(num_labels):
        num = uni[s] + uk
        if num > 0:
            lm.unigram[s] = math.log(num / (n_tok + uk * num_labels))
    for s1 in range(num_labels):
        denom = hist[s1] + k * num_labels
        mass = 0.0
        if denom > 0:
            for s2 in range(num_labels):
                num = max(big[(s1, s2)] - d, 0.0) + k
                if num > 0:
                    p = num / denom
                    lm.bigram[(s1, s2)] = math.log(p)
                    mass += p
        lm.backoff[s1] = math.log(max(1.0 - mass, smoothing.backoff_floor))
    return lm


def build_bigram_lm_graph(lm: BigramLM, labels: LabelSet | int) -> DecodingGraph:
    """Bigram LM as an FST whose output labels carry the history.

    Vertex 0 is the no-history start state, vertex s+1 the history state of
    label s, and (only when some history backs off) vertex K+1 the backoff
    state.  Bigram arcs read s2 and write the pair (s1, s2); start and
    backoff-state arcs write (eps, s2); backoff arcs read and write eps.
    The graph is cyclic and stays unsealed.
    """
    k = labels if isinstance(labels, int) else len(labels)
    missing = [s for s in range(k) if s not in lm.unigram]
    if missing:
        raise MissingUnigram(f"no unigram entry for label id(s) {missing}")
    g = DecodingGraph()
    start = g.add_vertex(0, initial=True)
    hist = [g.add_vertex(0, final=True) for _ in range(k)]
    backs_off = [s for s in range(k) if s in lm.backoff]
    bo_state = g.add_vertex(0) if backs_off else None

    for s in range(k):
        g.add_edge(start, hist[s], s, (EPS, s), lm.unigram[s])
    for s1 in range(k):
        for s2 in range(k):
            if (s1, s2) in lm.bigram:
                g.add_edge(hist[s1], hist[s2], s2, (s1, s2), lm.bigram[(s1, s2)])
        if s1 in lm.backoff:
            g.add_edge(hist[s1], bo_state, EPS, EPS, lm.backoff[s1])
    if bo_state is not None:
        for s in range(k):
            g.add_edge(bo_state, hist[s], s, (EPS, s), lm.unigram[s])
    return g


def lm_sequence_score(lm: BigramLM, seq: Sequence[int], weight: float = 1.0) -> float:
    """Best weighted LM route for a label sequence, computed from the tables.

    Independent of the graph construction; used as a brute-force reference.
    """
    if not seq:
        return 0.0
    total = weight * lm.unigram[seq[0]]
    for s1, s2 in zip(seq, seq[1:]):
        opts = lm.transition_options(s1, s2)
        if not opts:
            return float("-inf")
        total += max(weight * o for o in opts)
    return total
