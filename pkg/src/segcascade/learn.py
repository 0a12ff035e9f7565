"""Structured hinge loss, AdaGrad and level-by-level cascade training."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .compose import sigma_compose
from .errors import GoldUnreachable
from .evaluate import collapse as collapse_labels
from .evaluate import corpus_per
from .features import (EdgeContext, FeatureLayout, FeatureTable, FeatureTemplate, FrameScores,
                       EdgeArrays, Model, SparseFeatureVector)
from .graph import EPS, DecodingGraph, Path, best_path, current_label, trim
from .hypothesis import (BigramLM, SegmentationConfig, build_bigram_lm_graph, build_full_space)
from .prune import PruneReport, lattice_metrics, prune_to_lattice

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Segment:
    label: int
    start: int
    end: int

    @property
    def duration(self) -> int:
        return self.end - self.start


@dataclass
class Utterance:
    uid: str
    scores: FrameScores
    gold: tuple[Segment, ...]

    @property
    def labels(self) -> list[int]:
        return [s.label for s in self.gold]

    @property
    def num_frames(self) -> int:
        return self.scores.num_frames


def validate_gold(gold: Sequence[Segment], num_frames: int, num_labels: int,
                  seg: SegmentationConfig | None = None) -> None:
    """Gold segments must tile [0, T) and fit the segment-length bounds."""
    pos = 0
    for s in gold:
        if s.start != pos or s.end <= s.start:
            raise ValueError(f"gold segments must abut and be non-empty (at frame {pos})")
        if not 0 <= s.label < num_labels:
            raise ValueError(f"gold label id {s.label} outside [0, {num_labels})")
        if seg is not None and not seg.min_segment_frames <= s.duration <= seg.max_segment_frames:
            raise ValueError(f"gold segment [{s.start}, {s.end}) has length {s.duration}, outside "
                             f"[{seg.min_segment_frames}, {seg.max_segment_frames}]; it would be "
                             f"unreachable in the hypothesis space")
        pos = s.end
    if pos != num_frames:
        raise ValueError(f"gold segments cover [0, {pos}) but the utterance has {num_frames} frames")


# ---------------------------------------------------------------------------
# costs


def overlap_cost_edge(start: int, end: int, label: int, gold: Sequence[Segment]) -> float:
    """Frames of the segment not covered by its best same-label gold segment."""
    best = 0
    for g in gold:
        if g.label == label:
            best = max(best, min(end, g.end) - max(start, g.start))
    return float((end - start) - best)


def frame_error_cost_edge(start: int, end: int, label: int, gold: Sequence[Segment]) -> float:
    """Frames of the segment whose gold label differs from ``label``."""
    agree = sum(max(0, min(end, g.end) - max(start, g.start)) for g in gold if g.label == label)
    return float((end - start) - agree)


COSTS: dict[str, Callable] = {"overlap": overlap_cost_edge, "frame": frame_error_cost_edge}


def edge_costs(edges: EdgeArrays | Sequence[EdgeContext], gold: Sequence[Segment],
               kind: str = "overlap") -> np.ndarray:
    """Per-edge cost, vectorized; epsilon moves cost nothing."""
    if kind not in COSTS:
        raise ValueError(f"unknown cost {kind!r}")
    if not isinstance(edges, EdgeArrays):
        edges = EdgeArrays.from_contexts(edges)
    out = np.zeros(len(edges))
    live = ~edges.epsilon
    st = edges.start[live][:, None]
    en = edges.end[live][:, None]
    if not gold:
        out[live] = (en - st).ravel()
        return out
    lab = edges.label[live][:, None]
    gs = np.array([g.start for g in gold])[None, :]
    ge = np.array([g.end for g in gold])[None, :]
    gl = np.array([g.label for g in gold])[None, :]
    ov = np.clip(np.minimum(en, ge) - np.maximum(st, gs), 0, None) * (lab == gl)
    covered = ov.max(axis=1) if kind == "overlap" else ov.sum(axis=1)
    out[live] = (en - st).ravel() - covered
    return out


def path_cost(path: Iterable[int], costs: np.ndarray) -> float:
    return float(sum(costs[e] for e in path))


# ---------------------------------------------------------------------------
# per-utterance training instance


@dataclass
class Instance:
    """A sealed graph with its memoized features, edge costs and gold subgraph."""

    uid: str
    graph: DecodingGraph
    table: FeatureTable
    costs: np.ndarray
    gold_labels: list[int]
    gold_graph: DecodingGraph | None
    gold_edges: np.ndarray  # gold_graph edge -> graph edge

    @classmethod
    def build(cls, graph: DecodingGraph, utt: Utterance, layout: FeatureLayout,
              cost: str = "overlap", attrs: Mapping[str, np.ndarray] | None = None) -> "Instance":
        if attrs is None:
            attrs = edge_attributes(graph)
        arr = EdgeArrays.from_graph(graph, attrs)
        table = FeatureTable(layout, utt.scores, arr)
        costs = edge_costs(arr, utt.gold, cost)
        on_gold = arr.epsilon.copy()
        for sg in utt.gold:
            on_gold |= (arr.start == sg.start) & (arr.end == sg.end) & (arr.label == sg.label)
        keep = np.flatnonzero(on_gold).tolist()
        gold_graph, gold_edges = None, np.zeros(0, dtype=np.int64)
        if keep:
            sub = graph.subgraph(range(graph.num_vertices), keep)
            trimmed, tmap = trim(sub)
            if trimmed.num_edges:
                gold_graph = trimmed
                gold_edges = np.asarray(keep, dtype=np.int64)[list(tmap.edges)]
        return cls(utt.uid, graph, table, costs, utt.labels, gold_graph, gold_edges)

    def weights(self, theta: np.ndarray) -> np.ndarray:
        return self.table.scores(theta)

    def labels_of(self, path: Iterable[int]) -> list[int]:
        g = self.graph
        out = []
        for e in path:
            lab = current_label(g.olabels[e])
            if g.ilabels[e] != EPS and lab != EPS:
                out.append(lab)
        return out


def edge_attributes(g: DecodingGraph) -> dict[str, np.ndarray]:
    """lattice/lm attributes: source weights of a composed graph, or a lattice's own weights."""
    if hasattr(g, "left_weight"):
        return {"lattice": np.asarray(g.left_weight, dtype=np.float64),
                "lm": np.asarray(g.right_weight, dtype=np.float64)}
    w = np.asarray(g.weights, dtype=np.float64)
    if w.size and not np.isnan(w).any():
        return {"lattice": w}
    return {}


def decode(inst: Instance, theta: np.ndarray) -> tuple[Path, float]:
    return best_path(inst.graph, inst.weights(theta))


def cost_augmented_path(inst: Instance, theta: np.ndarray,
                        weights: np.ndarray | None = None) -> tuple[Path, float]:
    """argmax over paths of cost + score; returns the path and its cost + score."""
    w = inst.weights(theta) if weights is None else weights
    return best_path(inst.graph, w + inst.costs)


def gold_path(inst: Instance, theta: np.ndarray, weights: np.ndarray | None = None) -> tuple[Path, float]:
    """Best path whose segments are exactly the gold segments."""
    if inst.gold_graph is None:
        raise GoldUnreachable(f"gold segmentation of {inst.uid!r} is not in the graph")
    w = inst.weights(theta) if weights is None else weights
    sub_path, score = best_path(inst.gold_graph, w[inst.gold_edges])
    return Path(tuple(int(inst.gold_edges[e]) for e in sub_path.edges)), score


def hinge_terms(inst: Instance, theta: np.ndarray) -> tuple[float, Path, Path]:
    """(loss, gold path, cost-augmented path)."""
    w = inst.weights(theta)
    gpath, gscore = gold_path(inst, theta, w)
    apath, ascore = cost_augmented_path(inst, theta, w)
    return max(ascore - gscore, 0.0), gpath, apath


def hinge_loss(inst: Instance, theta: np.ndarray) -> float:
    return hinge_terms(inst, theta)[0]


def hinge_subgradient(inst: Instance, theta: np.ndarray) -> SparseFeatureVector:
    """phi(cost-augmented path) - phi(gold path); zero when they coincide."""
    _, gpath, apath = hinge_terms(inst, theta)
    return _subgradient(inst, gpath, apath)


def _subgradient(inst: Instance, gpath: Path, apath: Path) -> SparseFeatureVector:
    if gpath.edges == apath.edges:
        return SparseFeatureVector.zeros(inst.table.layout.dim)
    diff = inst.table.dense_sum(apath.edges) - inst.table.dense_sum(gpath.edges)
    return SparseFeatureVector.from_dense(diff)


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdaGradState:
    """Diagonal AdaGrad: acc += g^2; theta -= eta * g / (delta + sqrt(acc))."""

    acc: np.ndarray
    eta: float
    delta: float = 1e-8

    @classmethod
    def create(cls, dim: int, eta: float, delta: float = 1e-8) -> "AdaGradState":
        return cls(np.zeros(dim), eta, delta)


def adagrad_step(state: AdaGradState, theta: np.ndarray, grad: SparseFeatureVector) -> np.ndarray:
    """Update ``theta`` in place on the gradient's support only."""
    idx, g = grad.indices, grad.values
    if idx.size == 0:
        return theta
    state.acc[idx] += g * g
    theta[idx] -= state.eta * g / (state.delta + np.sqrt(state.acc[idx]))
    return theta


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    step_sizes: tuple[float, ...] = (0.01, 0.1, 1.0)
    epochs: int = 70
    seed: int = 0
    cost: str = "overlap"
    patience: int | None = None   # stop a step size after this many epochs without dev gain
    collapse: Mapping[int, int] | None = None

    def __post_init__(self) -> None:
        if any(s <= 0 for s in self.step_sizes):
            raise ValueError("step sizes must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class TrainResult:
    model: Model
    log: list[dict]
    step_size: float | None
    epoch: int
    dev_per: float


def dev_per(insts: Sequence[Instance], theta: np.ndarray,
            collapse: Mapping[int, int] | None = None) -> float:
    """Pooled PER of exact decoding."""
    pairs = []
    for inst in insts:
        path, _ = decode(inst, theta)
        hyp, ref = inst.labels_of(path), inst.gold_labels
        if collapse is not None:
            hyp, ref = collapse_labels(hyp, collapse), collapse_labels(ref, collapse)
        pairs.append((hyp, ref))
    return corpus_per(pairs).rate


def train_epoch(insts: Sequence[Instance], theta: np.ndarray, opt: AdaGradState,
                order: Sequence[int]) -> tuple[float, int]:
    """One pass of per-utterance subgradient steps; returns (mean loss, skipped)."""
    total, n, skipped = 0.0, 0, 0
    for i in order:
        inst = insts[i]
        try:
            loss, gpath, apath = hinge_terms(inst, theta)
        except GoldUnreachable:
            skipped += 1
            continue
        total += loss
        n += 1
        if loss > 0.0:
            adagrad_step(opt, theta, _subgradient(inst, gpath, apath))
    return (total / n if n else 0.0), skipped


def train_level(train: Sequence[Instance], dev: Sequence[Instance], layout: FeatureLayout,
                cfg: TrainConfig, init_theta: np.ndarray | None = None, level: int = 1) -> TrainResult:
    """Sweep step sizes; keep the (step size, epoch) with the lowest dev PER.

    Epoch 0 (the initial parameters) is a candidate too, so a zero-epoch
    budget returns the initial theta.  Ties keep the earliest candidate.
    """
    theta0 = np.zeros(layout.dim) if init_theta is None else np.array(init_theta, dtype=np.float64)
    records: list[dict] = []
    init_per = dev_per(dev, theta0, cfg.collapse) if dev else float("nan")
    best = TrainResult(Model(layout, theta0.copy()), records, None, 0, init_per)
    records.append({"level": level, "step_size": None, "epoch": 0, "train_loss_mean": None,
                    "dev_per": init_per, "skipped": 0})
    if cfg.epochs == 0:
        return best
    for si, eta in enumerate(cfg.step_sizes):
        theta = theta0.copy()
        opt = AdaGradState.create(layout.dim, eta)
        rng = np.random.default_rng([cfg.seed, level, si])
        since_best = 0
        run_best = init_per
        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(len(train))
            loss, skipped = train_epoch(train, theta, opt, order)
            per = dev_per(dev, theta, cfg.collapse) if dev else float("nan")
            records.append({"level": level, "step_size": eta, "epoch": epoch,
                            "train_loss_mean": loss, "dev_per": per, "skipped": skipped})
            log.info("level %d eta %g epoch %d loss %.4f dev PER %.4f skipped %d",
                     level, eta, epoch, loss, per, skipped)
            if per < best.dev_per:
                best = TrainResult(Model(layout, theta.copy()), records, eta, epoch, per)
            if per < run_best:
                run_best, since_best = per, 0
            else:
                since_best += 1
            if cfg.patience is not None and since_best >= cfg.patience:
                break
    best.log = records
    return best


# ---------------------------------------------------------------------------
# cascade


@dataclass
class LevelSpec:
    """One cascade level: its templates, the LM composed in (if any) and the
    pruning lambda used to build the next level's lattices."""

    templates: Sequence[FeatureTemplate]
    lam: float | None = None
    lm: BigramLM | None = None
    warm_start: bool = True   # lattice-score weight 1 when the template exists


@dataclass
class CascadeResult:
    models: list[Model]
    results: list[TrainResult]
    reports: list[dict[str, PruneReport]]
    graphs: list[dict[str, DecodingGraph]] = field(default_factory=list)


def first_level_graphs(utts: Iterable[Utterance], seg: SegmentationConfig,
                       num_labels: int) -> dict[str, DecodingGraph]:
    return {u.uid: build_full_space(u.num_frames, num_labels, seg) for u in utts}


def next_level_graph(graph: DecodingGraph, weights: np.ndarray, lam: float,
                     lm_graph: DecodingGraph | None) -> tuple[DecodingGraph, DecodingGraph, PruneReport]:
    """Prune under the current level's scores, then sigma-compose with the LM.

    Returns (lattice, next-level graph, report).
    """
    lattice, report = prune_to_lattice(graph, lam, weights)
    if lm_graph is None:
        return lattice, lattice, report
    return lattice, sigma_compose(lattice, lm_graph), report


def initial_theta(layout: FeatureLayout, warm: bool) -> np.ndarray:
    theta = np.zeros(layout.dim)
    if warm:
        try:
            theta[layout.offsets[layout.index_of("lattice_score")]] = 1.0
        except KeyError:
            pass
    return theta


def run_cascade(train: Sequence[Utterance], dev: Sequence[Utterance], seg: SegmentationConfig,
                num_labels: int, levels: Sequence[LevelSpec], cfg: TrainConfig,
                epochs: Sequence[int] | None = None) -> CascadeResult:
    """Train level by level; between levels prune with the trained model and compose."""
    if not levels:
        raise ValueError("cascade needs at least one level")
    utts = {u.uid: u for u in list(train) + list(dev)}
    for u in utts.values():
        validate_gold(u.gold, u.num_frames, num_labels, seg)
    graphs = first_level_graphs(utts.values(), seg, num_labels)
    out = CascadeResult([], [], [], [])
    for li, spec in enumerate(levels):
        level = li + 1
        layout = FeatureLayout(spec.templates, num_labels, seg.max_segment_frames)
        insts = {uid: Instance.build(g, utts[uid], layout, cfg.cost)
                 for uid, g in graphs.items()}
        lcfg = cfg if epochs is None else TrainConfig(cfg.step_sizes, epochs[li], cfg.seed,
                                                      cfg.cost, cfg.patience, cfg.collapse)
        init = initial_theta(layout, spec.warm_start and level > 1)
        res = train_level([insts[u.uid] for u in train], [insts[u.uid] for u in dev],
                          layout, lcfg, init, level)
        out.models.append(res.model)
        out.results.append(res)
        out.graphs.append(graphs)
        if li + 1 == len(levels):
            break
        lam = spec.lam if spec.lam is not None else 0.5
        nxt = levels[li + 1]
        lm_graph = build_bigram_lm_graph(nxt.lm, num_labels) if nxt.lm is not None else None
        reports: dict[str, PruneReport] = {}
        new_graphs: dict[str, DecodingGraph] = {}
        for uid, g in graphs.items():
            w = insts[uid].weights(res.model.theta)
            lattice, new_graphs[uid], rep = next_level_graph(g, w, lam, lm_graph)
            rep.density, rep.oracle_error = lattice_metrics(lattice, utts[uid].labels, cfg.collapse)
            rep.uid = uid
            reports[uid] = rep
        out.reports.append(reports)
        graphs = new_graphs
    return out


def cascade_decode(utts: Sequence[Utterance], result: CascadeResult, levels: Sequence[LevelSpec],
                   seg: SegmentationConfig, num_labels: int) -> list[dict[str, list[int]]]:
    """Run utterances through a trained cascade; exact label output of every level."""
    graphs = first_level_graphs(utts, seg, num_labels)
    scores = {u.uid: u.scores for u in utts}
    out: list[dict[str, list[int]]] = []
    for li, model in enumerate(result.models):
        hyps: dict[str, list[int]] = {}
        nxt_graphs: dict[str, DecodingGraph] = {}
        last = li + 1 == len(result.models)
        lm = None if last or levels[li + 1].lm is None else build_bigram_lm_graph(levels[li + 1].lm,
                                                                                   num_labels)
        for uid, g in graphs.items():
            arr = EdgeArrays.from_graph(g, edge_attributes(g))
            w = FeatureTable(model.layout, scores[uid], arr).scores(model.theta)
            path, _ = best_path(g, w)
            hyps[uid] = [int(arr.label[e]) for e in path.edges if not arr.epsilon[e]]
            if not last:
                lam = levels[li].lam if levels[li].lam is not None else 0.5
                _, nxt_graphs[uid], _ = next_level_graph(g, w, lam, lm)
        out.append(hyps)
        graphs = nxt_graphs
    return out
