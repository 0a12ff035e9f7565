"""Plain-text readers and writers for corpora, lattices, LMs and models.

All writers are deterministic: fixed ordering, fixed float formatting.
Readers raise :class:`FormatError` with the file name and line number.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .compose import ComposedGraph
from .errors import CycleDetected, FormatError, LabelOutOfRange
from .features import FeatureLayout, FeatureTemplate, FrameScores, Model
from .graph import DecodingGraph
from .hypothesis import BigramLM, LabelSet
from .learn import Segment, Utterance

PathLike = str | os.PathLike
SPLITS = ("train", "dev", "test")


def fmt_weight(x: float) -> str:
    """Shortest exact repr; nan marks an unscored edge."""
    return "nan" if math.isnan(x) else repr(float(x))


def fmt_exact(x: float) -> str:
    return repr(float(x))


def _lines(path: PathLike) -> list[tuple[int, list[str]]]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for n, raw in enumerate(fh, 1):
            fields = raw.split()
            if fields:
                out.append((n, fields))
    return out


def _fail(path: PathLike, line: int, msg: str) -> FormatError:
    return FormatError(f"{path}:{line}: {msg}")


def _float(path, n, tok: str) -> float:
    try:
        return float(tok)
    except ValueError:
        raise _fail(path, n, f"expected a number, got {tok!r}") from None


def _int(path, n, tok: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise _fail(path, n, f"expected an integer, got {tok!r}") from None


# ---------------------------------------------------------------------------
# labels and collapse maps


def write_labels(path: PathLike, labels: LabelSet) -> None:
    Path(path).write_text("".join(n + "\n" for n in labels.names), encoding="utf-8")


def read_labels(path: PathLike) -> LabelSet:
    names = []
    for n, f in _lines(path):
        if len(f) != 1 or "|" in f[0]:
            raise _fail(path, n, "expected one label name without '|'")
        names.append(f[0])
    if not names:
        raise FormatError(f"{path}: no labels")
    try:
        return LabelSet(tuple(names))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def read_collapse(path: PathLike) -> dict[str, str]:
    out: dict[str, str] = {}
    for n, f in _lines(path):
        if len(f) != 2:
            raise _fail(path, n, "expected '<from> <to>'")
        if f[0] in out:
            raise _fail(path, n, f"duplicate entry for {f[0]!r}")
        out[f[0]] = f[1]
    return out


# ---------------------------------------------------------------------------
# frame scores, segmentations, transcripts


def write_frame_scores(path: PathLike, fs: FrameScores) -> None:
    t, k = fs.matrix.shape
    rows = (" ".join(fmt_exact(x) for x in row) for row in fs.matrix)
    Path(path).write_text(f"frames {t} labels {k}\n" + "\n".join(rows) + "\n", encoding="utf-8")


def read_frame_scores(path: PathLike) -> FrameScores:
    lines = _lines(path)
    if not lines or len(lines[0][1]) != 4 or lines[0][1][0] != "frames" or lines[0][1][2] != "labels":
        raise FormatError(f"{path}:1: expected header 'frames T labels K'")
    t, k = _int(path, 1, lines[0][1][1]), _int(path, 1, lines[0][1][3])
    body = lines[1:]
    if len(body) != t:
        raise FormatError(f"{path}: header says {t} frames, found {len(body)} rows")
    rows = []
    for n, f in body:
        if len(f) != k:
            raise _fail(path, n, f"expected {k} values, got {len(f)}")
        rows.append([_float(path, n, x) for x in f])
    try:
        return FrameScores(np.array(rows))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_segments(path: PathLike, segs: Sequence[Segment], labels: LabelSet) -> None:
    Path(path).write_text("".join(f"{s.start} {s.end} {labels.name(s.label)}\n" for s in segs),
                          encoding="utf-8")


def read_segments(path: PathLike, labels: LabelSet) -> tuple[Segment, ...]:
    out = []
    for n, f in _lines(path):
        if len(f) != 3:
            raise _fail(path, n, "expected '<start> <end> <label>'")
        try:
            lab = labels.index(f[2])
        except LabelOutOfRange:
            raise _fail(path, n, f"unknown label {f[2]!r}") from None
        out.append(Segment(lab, _int(path, n, f[0]), _int(path, n, f[1])))
    return tuple(out)


def write_transcripts(path: PathLike, rows: Iterable[tuple[str, Sequence[str]]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for uid, labs in rows:
            fh.write(" ".join([uid, *labs]) + "\n")


def read_transcripts(path: PathLike) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for n, f in _lines(path):
        if f[0] in out:
            raise _fail(path, n, f"duplicate utterance id {f[0]!r}")
        out[f[0]] = f[1:]
    return out


# ---------------------------------------------------------------------------
# corpus directories


@dataclass
class Corpus:
    labels: LabelSet
    utterances: dict[str, Utterance]
    splits: dict[str, str]          # uid -> split

    def split(self, name: str) -> list[Utterance]:
        if name == "all":
            return list(self.utterances.values())
        return [u for uid, u in self.utterances.items() if self.splits[uid] == name]


def write_corpus(root: PathLike, labels: LabelSet, utts: Sequence[Utterance],
                 splits: Mapping[str, str]) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_labels(root / "labels.txt", labels)
    with open(root / "index.txt", "w", encoding="utf-8") as fh:
        for u in utts:
            fh.write(f"{u.uid} {splits[u.uid]}\n")
    for u in utts:
        write_frame_scores(root / f"{u.uid}.scores", u.scores)
        write_segments(root / f"{u.uid}.seg", u.gold, labels)
    write_transcripts(root / "ref.txt", ((u.uid, [labels.name(s) for s in u.labels]) for u in utts))


def read_corpus(root: PathLike, labels: LabelSet | None = None) -> Corpus:
    root = Path(root)
    if labels is None:
        labels = read_labels(root / "labels.txt")
    index = root / "index.txt"
    if not index.exists():
        raise FormatError(f"{root}: missing index.txt")
    utts: dict[str, Utterance] = {}
    splits: dict[str, str] = {}
    for n, f in _lines(index):
        if len(f) != 2 or f[1] not in SPLITS:
            raise _fail(index, n, f"expected '<uid> <split>' with split in {SPLITS}")
        uid = f[0]
        if uid in utts:
            raise _fail(index, n, f"duplicate utterance id {uid!r}")
        fs = read_frame_scores(root / f"{uid}.scores")
        if fs.num_labels != len(labels):
            raise FormatError(f"{root / (uid + '.scores')}: {fs.num_labels} columns, "
                              f"{len(labels)} labels")
        utts[uid] = Utterance(uid, fs, read_segments(root / f"{uid}.seg", labels))
        splits[uid] = f[1]
    if not utts:
        raise FormatError(f"{index}: no utterances")
    return Corpus(labels, utts, splits)


# ---------------------------------------------------------------------------
# lattices


def _label_str(x, labels: LabelSet) -> str:
    if isinstance(x, tuple):
        return "|".join(labels.name(s) for s in x)
    return labels.name(x)


def _parse_label(tok: str, labels: LabelSet):
    if "|" in tok:
        return tuple(labels.index(p) for p in tok.split("|"))
    return labels.index(tok)


def write_lattice(path: PathLike, g: DecodingGraph, labels: LabelSet) -> None:
    """Vertices, edges, then 'initial' and 'final' vertex lists.

    Graphs carrying lattice/LM attributes (composed graphs) get two extra
    edge columns holding them.
    """
    attrs = hasattr(g, "left_weight")
    out = [f"vertices {g.num_vertices} edges {g.num_edges}"]
    out += [f"{v} {int(t)}" for v, t in enumerate(g.times)]
    for e in range(g.num_edges):
        row = (f"{e} {int(g.tails[e])} {int(g.heads[e])} {_label_str(g.ilabels[e], labels)} "
               f"{_label_str(g.olabels[e], labels)} {fmt_weight(float(g.weights[e]))}")
        if attrs:
            row += f" {fmt_weight(float(g.left_weight[e]))} {fmt_weight(float(g.right_weight[e]))}"
        out.append(row)
    out.append(" ".join(["initial", *map(str, sorted(g.initials))]))
    out.append(" ".join(["final", *map(str, sorted(g.finals))]))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_lattice(path: PathLike, labels: LabelSet) -> DecodingGraph:
    lines = _lines(path)
    if not lines or len(lines[0][1]) != 4 or lines[0][1][0] != "vertices" or lines[0][1][2] != "edges":
        raise FormatError(f"{path}:1: expected header 'vertices N edges M'")
    nv, ne = _int(path, 1, lines[0][1][1]), _int(path, 1, lines[0][1][3])
    if len(lines) != 1 + nv + ne + 2:
        raise FormatError(f"{path}: expected {nv} vertex lines, {ne} edge lines and "
                          "initial/final lines")
    vlines = lines[1:1 + nv]
    elines = lines[1 + nv:1 + nv + ne]
    composed = bool(elines) and len(elines[0][1]) == 8
    g: DecodingGraph = ComposedGraph() if composed else DecodingGraph()
    for i, (n, f) in enumerate(vlines):
        if len(f) != 2 or _int(path, n, f[0]) != i:
            raise _fail(path, n, f"expected '{i} <time>'")
        g.add_vertex(_int(path, n, f[1]))
        if composed:
            g.pairs.append(None)
    width = 8 if composed else 6
    for i, (n, f) in enumerate(elines):
        if len(f) != width or _int(path, n, f[0]) != i:
            raise _fail(path, n, f"expected {width} fields starting with edge id {i}")
        try:
            il, ol = _parse_label(f[3], labels), _parse_label(f[4], labels)
        except LabelOutOfRange:
            raise _fail(path, n, f"unknown label in {f[3]!r} / {f[4]!r}") from None
        try:
            g.add_edge(_int(path, n, f[1]), _int(path, n, f[2]), il, ol, _float(path, n, f[5]))
        except ValueError as exc:
            raise _fail(path, n, str(exc)) from None
        if composed:
            g.left.append(-1)
            g.right.append(-1)
            g.left_weight.append(_float(path, n, f[6]))
            g.right_weight.append(_float(path, n, f[7]))
    for (n, f), key, target in ((lines[-2], "initial", g.initials), (lines[-1], "final", g.finals)):
        if f[0] != key:
            raise _fail(path, n, f"expected '{key} <vertex ids>'")
        for tok in f[1:]:
            v = _int(path, n, tok)
            if not 0 <= v < nv:
                raise _fail(path, n, f"vertex {v} out of range")
            target.add(v)
    try:
        return g.seal()
    except CycleDetected as exc:
        raise FormatError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# bigram LMs


def write_lm(path: PathLike, lm: BigramLM, labels: LabelSet) -> None:
    out = [f"1 {labels.name(s)} {fmt_exact(lp)}" for s, lp in sorted(lm.unigram.items())]
    out += [f"2 {labels.name(a)} {labels.name(b)} {fmt_exact(lp)}"
            for (a, b), lp in sorted(lm.bigram.items())]
    out += [f"B {labels.name(s)} {fmt_exact(lw)}" for s, lw in sorted(lm.backoff.items())]
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_lm(path: PathLike, labels: LabelSet) -> BigramLM:
    lm = BigramLM()
    for n, f in _lines(path):
        try:
            if f[0] == "2" and len(f) == 4:
                lm.bigram[(labels.index(f[1]), labels.index(f[2]))] = _float(path, n, f[3])
            elif f[0] == "1" and len(f) == 3:
                lm.unigram[labels.index(f[1])] = _float(path, n, f[2])
            elif f[0] == "B" and len(f) == 3:
                lm.backoff[labels.index(f[1])] = _float(path, n, f[2])
            else:
                raise _fail(path, n, "expected '2 s1 s2 lp', '1 s lp' or 'B s lw'")
        except LabelOutOfRange:
            raise _fail(path, n, "unknown label") from None
    return lm


# ---------------------------------------------------------------------------
# models


def write_model(path: PathLike, model: Model, level: int) -> None:
    """Header (level, sizes, template manifest) then sparse 'index value' lines."""
    lay = model.layout
    out = [f"model level {level} labels {lay.num_labels} max_len {lay.max_len} dim {lay.dim} "
           f"templates {len(lay.templates)}"]
    for t, (name, order, lex, d, off) in zip(lay.templates, lay.manifest()):
        out.append(f"template {name} {order} {d} {off} kind={t.kind} lex={lex} "
                   f"attr={t.attr or '-'} offsets={','.join(map(str, t.offsets))}")
    nz = np.flatnonzero(model.theta)
    out.append(f"theta {nz.size}")
    out += [f"{i} {fmt_exact(model.theta[i])}" for i in nz]
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_model(path: PathLike) -> tuple[Model, int]:
    """Returns (model, level); the layout is rebuilt and checked against the header."""
    lines = _lines(path)
    if not lines or lines[0][1][0] != "model" or len(lines[0][1]) != 11:
        raise FormatError(f"{path}:1: expected model header")
    h = lines[0][1]
    level, k, max_len, dim, nt = (_int(path, 1, h[i]) for i in (2, 4, 6, 8, 10))
    templates, manifest = [], []
    for n, f in lines[1:1 + nt]:
        if len(f) != 9 or f[0] != "template":
            raise _fail(path, n, "expected a template line")
        kv = dict(x.split("=", 1) for x in f[5:])
        try:
            t = FeatureTemplate(f[1], kv["kind"], kv["lex"], None if kv["attr"] == "-" else kv["attr"],
                                tuple(int(x) for x in kv["offsets"].split(",") if x))
        except (KeyError, ValueError) as exc:
            raise _fail(path, n, f"bad template: {exc}") from None
        templates.append(t)
        manifest.append((f[1], _int(path, n, f[2]), _int(path, n, f[3]), _int(path, n, f[4])))
    lay = FeatureLayout(templates, k, max_len)
    if lay.dim != dim or [(m[0], m[1], m[2], m[3]) for m in manifest] != \
            [(name, order, d, off) for name, order, _, d, off in lay.manifest()]:
        raise FormatError(f"{path}: template manifest does not match the rebuilt layout")
    rest = lines[1 + nt:]
    if not rest or rest[0][1][0] != "theta":
        raise FormatError(f"{path}: missing 'theta' line")
    theta = np.zeros(dim)
    for n, f in rest[1:]:
        i = _int(path, n, f[0])
        if not 0 <= i < dim or len(f) != 2:
            raise _fail(path, n, f"bad 'index value' line (dim {dim})")
        theta[i] = _float(path, n, f[1])
    if len(rest) - 1 != _int(path, rest[0][0], rest[0][1][1]):
        raise FormatError(f"{path}: theta count does not match")
    return Model(lay, theta), level


# ---------------------------------------------------------------------------
# JSON lines


def write_jsonl(path: PathLike, records: Iterable[Mapping]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")


def read_jsonl(path: PathLike) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
