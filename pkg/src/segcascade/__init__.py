"""Segmental structured-prediction cascades over time-stamped decoding graphs.

Level one scores every labeled segmentation of an utterance; each later
level prunes the previous graph by max-marginals, composes the surviving
lattice with a bigram label model and rescores it with richer features.
"""

from .graph import DecodingGraph, Path, best_path, enumerate_paths, trim
from .hypothesis import BigramLM, LabelSet, SegmentationConfig, build_full_space
from .compose import sigma_compose
from .features import FeatureLayout, FrameScores, Model
from .prune import PruneReport, prune_to_lattice
from .beam import beam_decode, hit_rate
from .learn import TrainConfig, run_cascade, train_level
from .evaluate import corpus_per, per
from .synth import SynthConfig, generate

__version__ = "0.1.0"

__all__ = [
    "DecodingGraph", "Path", "best_path", "enumerate_paths", "trim",
    "BigramLM", "LabelSet", "SegmentationConfig", "build_full_space",
    "sigma_compose", "FeatureLayout", "FrameScores", "Model",
    "PruneReport", "prune_to_lattice", "beam_decode", "hit_rate",
    "TrainConfig", "run_cascade", "train_level", "corpus_per", "per",
    "SynthConfig", "generate", "__version__",
]
