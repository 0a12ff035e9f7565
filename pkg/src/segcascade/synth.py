"""Seeded synthetic corpora with controllable segment and transition structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import FrameScores
from .learn import Segment, Utterance


@dataclass(frozen=True)
class SynthConfig:
    """Knobs of the generator.

    ``sharpness`` is the logit bonus of the true label before unit-scale
    Gaussian noise; ``transition_strength`` scales random logits of the
    label chain (0 gives uniform transitions).  Self-transitions never
    occur, so consecutive segments always change label.
    """

    seed: int = 0
    num_utterances: int = 100
    min_frames: int = 30
    max_frames: int = 60
    num_labels: int = 5
    mean_segment_frames: float = 5.0
    max_segment_frames: int = 12
    sharpness: float = 2.0
    transition_strength: float = 0.0

    def __post_init__(self) -> None:
        if min(self.num_utterances, self.min_frames, self.num_labels, self.max_segment_frames) < 1:
            raise ValueError("counts must be positive")
        if self.min_frames > self.max_frames:
            raise ValueError("min_frames > max_frames")
        if self.num_labels < 2:
            raise ValueError("need at least two labels")
        if self.mean_segment_frames < 1:
            raise ValueError("mean_segment_frames must be >= 1")
        if self.sharpness < 0 or self.transition_strength < 0:
            raise ValueError("sharpness and transition_strength must be >= 0")


def transition_matrix(cfg: SynthConfig) -> np.ndarray:
    """Row-stochastic label chain with a zero diagonal."""
    rng = np.random.default_rng([cfg.seed, 1])
    k = cfg.num_labels
    logits = cfg.transition_strength * rng.standard_normal((k, k))
    np.fill_diagonal(logits, -np.inf)
    p = np.exp(logits - logits.max(axis=1, keepdims=True))
    return p / p.sum(axis=1, keepdims=True)


def _log_softmax(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=1, keepdims=True))


def generate(cfg: SynthConfig) -> list[Utterance]:
    trans = transition_matrix(cfg)
    rng = np.random.default_rng([cfg.seed, 2])
    k = cfg.num_labels
    p_end = 1.0 / cfg.mean_segment_frames
    width = len(str(cfg.num_utterances - 1))
    utts = []
    for n in range(cfg.num_utterances):
        num_frames = int(rng.integers(cfg.min_frames, cfg.max_frames + 1))
        segs = []
        pos = 0
        label = int(rng.integers(k))
        while pos < num_frames:
            dur = int(min(rng.geometric(p_end), cfg.max_segment_frames, num_frames - pos))
            segs.append(Segment(label, pos, pos + dur))
            pos += dur
            label = int(rng.choice(k, p=trans[label]))
        truth = np.empty(num_frames, dtype=np.int64)
        for s in segs:
            truth[s.start:s.end] = s.label
        logits = rng.standard_normal((num_frames, k))
        logits[np.arange(num_frames), truth] += cfg.sharpness
        utts.append(Utterance(f"utt{n:0{width}d}", FrameScores(_log_softmax(logits)), tuple(segs)))
    return utts


def frame_argmax_labels(utt: Utterance) -> list[int]:
    """Per-frame argmax with runs merged: the no-segment-model baseline."""
    best = np.argmax(utt.scores.matrix, axis=1)
    out = [int(best[0])]
    for b in best[1:]:
        if b != out[-1]:
            out.append(int(b))
    return out
