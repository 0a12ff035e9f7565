import math

import numpy as np
import pytest

from segcascade.errors import GoldUnreachable
from segcascade.features import (EdgeArrays, EdgeContext, FeatureLayout, FeatureTemplate,
                                 FrameScores, SparseFeatureVector, first_level_templates)
from segcascade.graph import best_path, enumerate_paths
from segcascade.hypothesis import (SegmentationConfig, SmoothingConfig, build_full_space,
                                   estimate_bigram_lm)
from segcascade.learn import (AdaGradState, Instance, LevelSpec, Segment, TrainConfig, Utterance,
                              adagrad_step, cost_augmented_path, dev_per, edge_costs, gold_path,
                              hinge_loss, hinge_subgradient, initial_theta, overlap_cost_edge,
                              path_cost, run_cascade, train_level, validate_gold)
from segcascade.synth import SynthConfig, generate

SEG = SegmentationConfig(max_segment_frames=6)


def small_corpus(seed=0, n=8, sharpness=2.0):
    cfg = SynthConfig(seed=seed, num_utterances=n, min_frames=6, max_frames=9, num_labels=3,
                      mean_segment_frames=2.5, max_segment_frames=6, sharpness=sharpness,
                      transition_strength=2.0)
    return generate(cfg)


def instances(utts, templates=None):
    layout = FeatureLayout(templates or first_level_templates(), 3, SEG.max_segment_frames)
    return layout, [Instance.build(build_full_space(u.num_frames, 3, SEG), u, layout) for u in utts]


def test_overlap_cost_examples():
    gold = [Segment(0, 0, 10), Segment(1, 10, 20)]
    assert overlap_cost_edge(0, 10, 0, gold) == 0.0
    assert overlap_cost_edge(5, 15, 0, gold) == 5.0
    assert overlap_cost_edge(5, 15, 2, gold) == 10.0


def test_vectorized_costs_match_scalar():
    gold = [Segment(0, 0, 3), Segment(1, 3, 4), Segment(0, 4, 7)]
    g = build_full_space(7, 3, SegmentationConfig(max_segment_frames=7))
    arr = EdgeArrays.from_graph(g)
    got = edge_costs(arr, gold)
    want = [overlap_cost_edge(int(s), int(e), int(lab), gold)
            for s, e, lab in zip(arr.start, arr.end, arr.label)]
    assert got.tolist() == want
    eps = edge_costs([EdgeContext(None, None)], gold)
    assert eps.tolist() == [0.0]
    frame = edge_costs(arr, gold, "frame")
    # frame cost counts every frame whose gold label differs
    i = next(e for e in range(len(arr)) if (arr.start[e], arr.end[e], arr.label[e]) == (2, 6, 0))
    assert frame[i] == 1.0 and got[i] == 2.0
    with pytest.raises(ValueError):
        edge_costs(arr, gold, "nope")


def test_adagrad_arithmetic():
    st = AdaGradState.create(3, 0.1, delta=0.0)
    theta = np.zeros(3)
    g = SparseFeatureVector.from_dict({1: 1.0}, 3)
    adagrad_step(st, theta, g)
    assert theta.tolist() == [0.0, -0.1, 0.0]
    adagrad_step(st, theta, g)
    assert theta[1] == pytest.approx(-0.1 - 0.1 / math.sqrt(2))
    before = theta.copy()
    adagrad_step(st, theta, SparseFeatureVector.zeros(3))
    assert np.array_equal(theta, before)


def test_zero_epochs_returns_initial_theta():
    layout, insts = instances(small_corpus(n=4))
    res = train_level(insts[:2], insts[2:], layout, TrainConfig(epochs=0))
    assert not res.model.theta.any() and res.epoch == 0 and res.step_size is None
    init = np.random.default_rng(0).normal(size=layout.dim)
    res = train_level(insts[:2], insts[2:], layout, TrainConfig(epochs=0), init)
    assert np.array_equal(res.model.theta, init)


def test_cost_augmented_and_gold_paths_by_enumeration():
    layout, insts = instances(small_corpus(n=6))
    rng = np.random.default_rng(1)
    for inst in insts:
        g = inst.graph
        if g.num_edges > 60:
            continue
        theta = rng.normal(size=layout.dim) * 0.3
        w = inst.weights(theta)
        paths = enumerate_paths(g, cap=200_000, weights=w)
        aug = max(s + path_cost(p, inst.costs) for p, s in paths)
        assert cost_augmented_path(inst, theta)[1] == pytest.approx(aug, abs=1e-9)
        gold = [(p, s) for p, s in paths if path_cost(p, inst.costs) == 0]
        gp, gs = gold_path(inst, theta)
        assert gs == pytest.approx(max(s for _, s in gold), abs=1e-9)
        assert inst.labels_of(gp) == inst.gold_labels


def test_hinge_is_nonnegative_and_bounds_the_cost():
    layout, insts = instances(small_corpus(n=6))
    rng = np.random.default_rng(2)
    for inst in insts:
        for scale in (0.0, 0.1, 1.0):
            theta = rng.normal(size=layout.dim) * scale
            loss = hinge_loss(inst, theta)
            assert loss >= 0.0
            path, _ = best_path(inst.graph, inst.weights(theta))
            assert loss >= path_cost(path, inst.costs) - 1e-9


def test_zero_theta_loss_is_max_cost():
    layout, insts = instances(small_corpus(n=3))
    for inst in insts:
        path, _ = best_path(inst.graph, inst.costs)
        assert hinge_loss(inst, np.zeros(layout.dim)) == path_cost(path, inst.costs)


def test_subgradient_matches_finite_differences():
    layout, insts = instances(small_corpus(n=4))
    rng = np.random.default_rng(3)
    checked = 0
    for inst in insts:
        theta = rng.normal(size=layout.dim)
        d = rng.normal(size=layout.dim)
        h = 1e-6
        g = hinge_subgradient(inst, theta)
        if not all(hinge_subgradient(inst, theta + s * h * d) == g for s in (-1, 1)):
            continue
        fd = (hinge_loss(inst, theta + h * d) - hinge_loss(inst, theta - h * d)) / (2 * h)
        assert fd == pytest.approx(g.dot(d), abs=1e-4)
        checked += 1
    assert checked


def test_separable_corpus_is_learned():
    utts = small_corpus(seed=4, n=24, sharpness=12.0)
    layout, insts = instances(utts)
    res = train_level(insts[:16], insts[16:], layout, TrainConfig(step_sizes=(1.0,), epochs=20))
    assert res.dev_per == 0.0
    assert dev_per(insts[16:], res.model.theta) == 0.0


def test_training_is_deterministic():
    layout, insts = instances(small_corpus(n=6))
    cfg = TrainConfig(step_sizes=(0.1, 1.0), epochs=2, seed=7)
    a = train_level(insts[:4], insts[4:], layout, cfg)
    b = train_level(insts[:4], insts[4:], layout, cfg)
    assert a.model.theta.tobytes() == b.model.theta.tobytes()
    assert a.log == b.log


def test_unreachable_gold_is_skipped():
    utts = small_corpus(n=3)
    layout = FeatureLayout(first_level_templates(), 3, 1)
    short = SegmentationConfig(max_segment_frames=1)
    insts = [Instance.build(build_full_space(u.num_frames, 3, short), u, layout) for u in utts]
    long_gold = [i for i, u in enumerate(utts) if max(s.duration for s in u.gold) > 1]
    assert long_gold
    with pytest.raises(GoldUnreachable):
        gold_path(insts[long_gold[0]], np.zeros(layout.dim))
    res = train_level(insts, insts, layout, TrainConfig(step_sizes=(0.1,), epochs=1))
    assert res.log[1]["skipped"] == len(long_gold)


def test_validate_gold():
    validate_gold([Segment(0, 0, 2), Segment(1, 2, 3)], 3, 2)
    with pytest.raises(ValueError, match="abut"):
        validate_gold([Segment(0, 0, 2), Segment(1, 3, 4)], 4, 2)
    with pytest.raises(ValueError, match="cover"):
        validate_gold([Segment(0, 0, 2)], 3, 2)
    with pytest.raises(ValueError, match="outside"):
        validate_gold([Segment(4, 0, 3)], 3, 2)
    with pytest.raises(ValueError, match="unreachable"):
        validate_gold([Segment(0, 0, 3)], 3, 2, SegmentationConfig(max_segment_frames=2))


def test_warm_start_sets_lattice_weight():
    layout = FeatureLayout([FeatureTemplate("bias", "bias"),
                            FeatureTemplate("lattice_score", "attr", lex="none", attr="lattice")], 3, 6)
    theta = initial_theta(layout, True)
    assert theta.tolist() == [0.0, 0.0, 0.0, 1.0]
    assert not initial_theta(layout, False).any()


def test_lambda_one_cascade_keeps_single_best_paths():
    utts = small_corpus(n=6)
    lm = estimate_bigram_lm([u.labels for u in utts], 3, SmoothingConfig(k=0.5))
    levels = [LevelSpec(first_level_templates(), lam=1.0),
              LevelSpec([FeatureTemplate("lattice_score", "attr", lex="none", attr="lattice"),
                         FeatureTemplate("lm_score", "attr", lex="none", attr="lm")], lm=lm)]
    res = run_cascade(utts[:4], utts[4:], SEG, 3, levels,
                      TrainConfig(step_sizes=(0.1,), epochs=1), epochs=[1, 1])
    for uid, g in res.graphs[1].items():
        segs = {(int(g.times[g.tails[e]]), int(g.times[g.heads[e]]))
                for e in range(g.num_edges) if g.ilabels[e] != -1}
        # every composed path reads the one surviving segmentation
        assert sum(1 for v in range(g.num_vertices) if not g.in_edges(v).size) == 1
        assert len({s for s, _ in segs}) == len(segs) == res.reports[0][uid].kept_edges
    # one-level spec reduces to a plain train_level
    one = run_cascade(utts[:4], utts[4:], SEG, 3, levels[:1], TrainConfig(step_sizes=(0.1,), epochs=1))
    layout, insts = instances(utts)
    plain = train_level(insts[:4], insts[4:], layout, TrainConfig(step_sizes=(0.1,), epochs=1))
    assert np.array_equal(one.models[0].theta, plain.model.theta)


def test_frame_scores_are_validated():
    with pytest.raises(ValueError):
        FrameScores(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        FrameScores(np.array([[np.nan]]))
    u = Utterance("x", FrameScores(np.zeros((2, 2))), (Segment(1, 0, 2),))
    assert u.labels == [1] and u.num_frames == 2
