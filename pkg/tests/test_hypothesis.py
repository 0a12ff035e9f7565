import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segcascade.errors import EmptyCorpus, LabelOutOfRange, MissingUnigram
from segcascade.graph import EPS, enumerate_paths
from segcascade.hypothesis import (BigramLM, LabelSet, SegmentationConfig, SmoothingConfig,
                                   build_bigram_lm_graph, build_full_space, estimate_bigram_lm,
                                   full_space_edge_count, lm_sequence_score)

from oracles import lm_route_score, random_lm


def test_four_frame_space():
    g = build_full_space(4, LabelSet.from_names("abc"), SegmentationConfig(max_segment_frames=3))
    assert g.num_vertices == 5 and g.num_edges == 27
    assert g.times.tolist() == [0, 1, 2, 3, 4]
    assert g.initials == {0} and g.finals == {4}
    assert np.isnan(g.weights).all()
    assert all(a == b for a, b in zip(g.ilabels, g.olabels))


def test_smallest_space():
    g = build_full_space(1, 1, SegmentationConfig(max_segment_frames=1))
    assert (g.num_vertices, g.num_edges) == (2, 1)


def test_two_frame_paths():
    g = build_full_space(2, 2, SegmentationConfig(max_segment_frames=2))
    assert g.num_edges == 6
    assert len(enumerate_paths(g, weights=np.zeros(6))) == 6


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 8), st.integers(1, 4), st.integers(1, 5), st.integers(0, 4))
def test_edge_count_formula(t, k, lo, extra):
    cfg = SegmentationConfig(max_segment_frames=lo + extra, min_segment_frames=lo)
    g = build_full_space(t, k, cfg)
    assert g.num_edges == full_space_edge_count(t, k, cfg)
    assert g.num_edges == k * sum(max(0, t - ell + 1) for ell in range(lo, lo + extra + 1))


def test_each_segmentation_is_one_path():
    t, k = 5, 2
    g = build_full_space(t, k, SegmentationConfig(max_segment_frames=t))
    paths = enumerate_paths(g, weights=np.zeros(g.num_edges))
    segs = {tuple((int(g.tails[e]), int(g.heads[e]), g.olabels[e]) for e in p) for p, _ in paths}
    # sum over compositions of 5 of 2^parts = 2 * 3^4
    assert len(paths) == len(segs) == 162


def test_label_set():
    ls = LabelSet.from_names(["a", "b"], sentence_markers=True)
    assert ls.names == ("a", "b", "<s>", "</s>")
    assert ls.index("<eps>") == EPS and ls.name(EPS) == "<eps>"
    with pytest.raises(LabelOutOfRange):
        ls.index("z")
    with pytest.raises(ValueError):
        LabelSet(("a", "a"))


def full_table(k):
    lm = BigramLM()
    for s in range(k):
        lm.unigram[s] = -math.log(k)
        for s2 in range(k):
            lm.bigram[(s, s2)] = -math.log(k)
    return lm


def test_lm_graph_without_backoff():
    g = build_bigram_lm_graph(full_table(3), 3)
    assert g.num_vertices == 4
    labeled = [e for e in range(g.num_edges) if g.ilabels[e] != EPS]
    assert len(labeled) == g.num_edges == 12
    assert g.initials == {0} and g.finals == {1, 2, 3}
    assert g.olabels[:3] == [(EPS, 0), (EPS, 1), (EPS, 2)]
    assert (1, 2) in g.olabels


def test_single_label_lm():
    g = build_bigram_lm_graph(full_table(1), 1)
    assert g.num_edges == 2
    assert g.olabels == [(EPS, 0), (0, 0)]
    assert g.tails[1] == g.heads[1] == 1


def test_backoff_route():
    lm = BigramLM(unigram={0: math.log(0.4), 1: math.log(0.6)}, backoff={0: math.log(0.3)},
                  bigram={(0, 0): math.log(0.7), (1, 1): 0.0})
    g = build_bigram_lm_graph(lm, 2)
    assert g.num_vertices == 4
    bo = 3
    eps = [e for e in range(g.num_edges) if g.ilabels[e] == EPS]
    assert len(eps) == 1 and g.tails[eps[0]] == 1 and g.heads[eps[0]] == bo
    into_b = [e for e in range(g.num_edges) if g.tails[e] == bo and g.ilabels[e] == 1]
    total = g.weights[eps[0]] + g.weights[into_b[0]]
    assert total == pytest.approx(math.log(0.3) + math.log(0.6))
    assert lm_sequence_score(lm, [0, 1]) == pytest.approx(math.log(0.4) + math.log(0.3) + math.log(0.6))


def test_missing_unigram():
    with pytest.raises(MissingUnigram):
        build_bigram_lm_graph(BigramLM(unigram={0: 0.0}), 2)


def test_add_one_estimate():
    lm = estimate_bigram_lm([[0, 0]], 2, SmoothingConfig(k=1.0))
    assert math.exp(lm.bigram[(0, 0)]) == pytest.approx(2 / 3)


def test_deterministic_corpus():
    lm = estimate_bigram_lm([[0, 1], [0, 1]], 2, SmoothingConfig(k=0.0))
    assert lm.bigram[(0, 1)] == 0.0
    assert (0, 0) not in lm.bigram


def test_unseen_bigram_goes_through_backoff():
    lm = estimate_bigram_lm([[0, 1], [0, 1]], 2, SmoothingConfig(k=0.0))
    assert (0, 0) not in lm.bigram
    assert lm.transition_options(0, 0) == [lm.backoff[0] + lm.unigram[0]]
    assert math.isfinite(lm_sequence_score(lm, [0, 0, 1, 1]))


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        estimate_bigram_lm([], 2)
    with pytest.raises(EmptyCorpus):
        estimate_bigram_lm([[], []], 2)
    with pytest.raises(LabelOutOfRange):
        estimate_bigram_lm([[0, 5]], 2)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_every_sequence_is_accepted(seed):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, 4))
    lm = random_lm(rng, k)
    seq = list(rng.integers(0, k, size=int(rng.integers(1, 6))))
    score = lm_sequence_score(lm, seq)
    assert math.isfinite(score)
    assert score == pytest.approx(lm_route_score(lm, seq))
