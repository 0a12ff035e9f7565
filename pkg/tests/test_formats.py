import numpy as np
import pytest

from segcascade.compose import sigma_compose
from segcascade.errors import FormatError
from segcascade.features import FeatureLayout, FrameScores, Model, second_level_templates
from segcascade.formats import (read_collapse, read_corpus, read_frame_scores, read_labels,
                                read_lattice, read_lm, read_model, read_segments,
                                read_transcripts, write_corpus, write_frame_scores, write_labels,
                                write_lattice, write_lm, write_model, write_transcripts)
from segcascade.hypothesis import (LabelSet, SegmentationConfig, SmoothingConfig,
                                   build_bigram_lm_graph, build_full_space, estimate_bigram_lm)
from segcascade.prune import prune_to_lattice
from segcascade.synth import SynthConfig, generate

LABELS = LabelSet(("a", "b", "c"))


def same_graph(g, h):
    assert g.times.tolist() == h.times.tolist()
    assert g.tails.tolist() == h.tails.tolist() and g.heads.tolist() == h.heads.tolist()
    assert list(g.ilabels) == list(h.ilabels) and list(g.olabels) == list(h.olabels)
    assert np.array_equal(g.weights, h.weights, equal_nan=True)
    assert g.initials == h.initials and g.finals == h.finals


def test_plain_lattice_round_trip(tmp_path):
    g = build_full_space(4, 3, SegmentationConfig(max_segment_frames=3))
    write_lattice(tmp_path / "u.lat", g, LABELS)
    same_graph(g, read_lattice(tmp_path / "u.lat", LABELS))
    w = np.random.default_rng(0).normal(size=g.num_edges)
    lat, _ = prune_to_lattice(g, 0.3, w)
    write_lattice(tmp_path / "p.lat", lat, LABELS)
    same_graph(lat, read_lattice(tmp_path / "p.lat", LABELS))


def test_composed_lattice_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    g = build_full_space(4, 3, SegmentationConfig(max_segment_frames=2))
    lat, _ = prune_to_lattice(g, 0.5, rng.normal(size=g.num_edges))
    lm = estimate_bigram_lm([[0, 1, 2], [2, 1]], 3, SmoothingConfig(k=0.0, discount=0.2))
    comp = sigma_compose(lat, build_bigram_lm_graph(lm, 3))
    write_lattice(tmp_path / "c.lat", comp, LABELS)
    back = read_lattice(tmp_path / "c.lat", LABELS)
    same_graph(comp, back)
    assert list(back.left_weight) == list(comp.left_weight)
    assert list(back.right_weight) == list(comp.right_weight)
    assert any(lab == -1 for lab in back.ilabels)
    text = (tmp_path / "c.lat").read_text()
    assert "<eps>|a" in text and " nan " in text


def test_lm_round_trip(tmp_path):
    lm = estimate_bigram_lm([[0, 1, 2], [2, 1]], 3, SmoothingConfig(k=0.0, discount=0.2))
    write_lm(tmp_path / "lm.txt", lm, LABELS)
    back = read_lm(tmp_path / "lm.txt", LABELS)
    assert back == lm


def test_model_round_trip(tmp_path):
    layout = FeatureLayout(second_level_templates(), 3, 7)
    theta = np.random.default_rng(2).normal(size=layout.dim)
    theta[::3] = 0.0
    write_model(tmp_path / "m.txt", Model(layout, theta), 2)
    model, level = read_model(tmp_path / "m.txt")
    assert level == 2 and model.layout == layout
    assert model.theta.tobytes() == theta.tobytes()


def test_corpus_round_trip(tmp_path):
    utts = generate(SynthConfig(seed=0, num_utterances=4, num_labels=3))
    splits = {u.uid: s for u, s in zip(utts, ("train", "train", "dev", "test"))}
    write_corpus(tmp_path, LABELS, utts, splits)
    c = read_corpus(tmp_path)
    assert c.labels == LABELS and c.splits == splits
    for u in utts:
        v = c.utterances[u.uid]
        assert v.gold == u.gold and v.scores.matrix.tobytes() == u.scores.matrix.tobytes()
    assert [u.uid for u in c.split("dev")] == [utts[2].uid]
    refs = read_transcripts(tmp_path / "ref.txt")
    assert refs[utts[0].uid] == [LABELS.name(s) for s in utts[0].labels]


def test_small_readers(tmp_path):
    write_labels(tmp_path / "l.txt", LABELS)
    assert read_labels(tmp_path / "l.txt") == LABELS
    (tmp_path / "map.txt").write_text("a x\nb x\nc c\n")
    assert read_collapse(tmp_path / "map.txt") == {"a": "x", "b": "x", "c": "c"}
    fs = FrameScores(np.log(np.full((2, 3), 1 / 3)))
    write_frame_scores(tmp_path / "f.scores", fs)
    assert read_frame_scores(tmp_path / "f.scores").matrix.tobytes() == fs.matrix.tobytes()
    write_transcripts(tmp_path / "h.txt", [("u1", ["a", "b"]), ("u2", [])])
    assert read_transcripts(tmp_path / "h.txt") == {"u1": ["a", "b"], "u2": []}


@pytest.mark.parametrize("name, text, reader", [
    ("labels", "a\na|b\n", lambda p: read_labels(p)),
    ("labels", "a\na\n", lambda p: read_labels(p)),
    ("labels", "", lambda p: read_labels(p)),
    ("collapse", "a x y\n", lambda p: read_collapse(p)),
    ("collapse", "a x\na y\n", lambda p: read_collapse(p)),
    ("scores", "frames 2 labels 3\n0 0 0\n", lambda p: read_frame_scores(p)),
    ("scores", "frames 1 labels 2\n0 zero\n", lambda p: read_frame_scores(p)),
    ("scores", "rows 1\n", lambda p: read_frame_scores(p)),
    ("seg", "0 2 z\n", lambda p: read_segments(p, LABELS)),
    ("seg", "0 2\n", lambda p: read_segments(p, LABELS)),
    ("hyp", "u a\nu b\n", lambda p: read_transcripts(p)),
    ("lat", "vertices 2 edges 1\n0 0\n1 1\n0 0 1 a a 1.0\ninitial 0\n", lambda p: read_lattice(p, LABELS)),
    ("lat", "vertices 2 edges 1\n0 0\n1 1\n0 0 1 q a 1.0\ninitial 0\nfinal 1\n",
     lambda p: read_lattice(p, LABELS)),
    ("lat", "vertices 2 edges 2\n0 0\n1 1\n0 0 1 a a 1\n1 1 0 a a 1\ninitial 0\nfinal 1\n",
     lambda p: read_lattice(p, LABELS)),
    ("lat", "vertices 1 edges 0\n0 0\ninitial 3\nfinal 0\n", lambda p: read_lattice(p, LABELS)),
    ("lm", "3 a b c 0.1\n", lambda p: read_lm(p, LABELS)),
    ("lm", "1 z -1.0\n", lambda p: read_lm(p, LABELS)),
    ("model", "weights 3\n", lambda p: read_model(p)),
])
def test_malformed_inputs(tmp_path, name, text, reader):
    p = tmp_path / name
    p.write_text(text)
    with pytest.raises(FormatError):
        reader(p)


def test_model_manifest_is_checked(tmp_path):
    layout = FeatureLayout(second_level_templates(), 3, 7)
    write_model(tmp_path / "m.txt", Model.zeros(layout), 2)
    lines = (tmp_path / "m.txt").read_text().splitlines()
    lines[0] = lines[0].replace(f"dim {layout.dim}", f"dim {layout.dim + 1}")
    (tmp_path / "bad.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError):
        read_model(tmp_path / "bad.txt")


def test_missing_index(tmp_path):
    write_labels(tmp_path / "labels.txt", LABELS)
    with pytest.raises(FormatError):
        read_corpus(tmp_path)
