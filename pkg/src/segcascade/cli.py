"""Command-line front end: synth, train, decode, prune, compose, eval, hitrate.

Every subcommand reads a ``key=value`` config (``#`` starts a comment),
stages its outputs in a temporary directory that replaces the target only
on success, and writes ``manifest.json`` beside what it produced.

Output layout under the config's ``out`` directory::

    level<N>/model/      model.txt, train_log.jsonl
    level<N>/lattices/   <uid>.lat, prune_report.jsonl
    level<N>/graphs/     <uid>.lat (composed, input to level N training)
    level<N>/decode-exact/ or decode-beam<W>/   hyp.txt, scores.jsonl
    level<N>/hitrate-beam<W>/                   hitrate.jsonl
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import logging
import re
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from . import __version__
from .beam import beam_decode, compare_to_exact, max_frontier
from .compose import sigma_compose
from .errors import ConfigError, FormatError, SegCascadeError
from .evaluate import collapse as collapse_seq
from .evaluate import corpus_per
from .features import FeatureLayout, FeatureTable, Model, template_set
from .formats import (Corpus, read_collapse, read_corpus, read_labels, read_lattice, read_lm,
                      read_model, read_transcripts, write_corpus, write_jsonl, write_lattice, write_lm, write_model, write_transcripts)
from .graph import EPS, best_path, current_label
from .hypothesis import (LabelSet, SegmentationConfig, SmoothingConfig, build_bigram_lm_graph,
                         build_full_space, estimate_bigram_lm)
from .learn import Instance, TrainConfig, initial_theta, train_level, validate_gold
from .prune import lattice_metrics, prune_to_lattice
from .synth import SynthConfig, generate

log = logging.getLogger("segcascade")

EXIT_CONFIG, EXIT_FORMAT, EXIT_DOMAIN, EXIT_IO = 2, 3, 4, 5


# ---------------------------------------------------------------------------
# configuration

_SCALARS: dict[str, tuple[Callable[[str], Any], Any]] = {
    "data": (str, None),
    "out": (str, None),
    "labels": (str, None),
    "collapse": (str, None),
    "seed": (int, 0),
    "workers": (int, 1),
    "max_segment_frames": (int, 30),
    "min_segment_frames": (int, 1),
    "lm": (str, "estimate"),
    "lm.k": (float, 0.5),
    "lm.discount": (float, 0.0),
    "lm.unigram_k": (float, 1.0),
    "beam": (int, None),
    "step_sizes": (lambda s: tuple(float(x) for x in s.split(",")), (0.01, 0.1, 1.0)),
    "epochs": (int, 70),
    "cost": (str, "overlap"),
    "patience": (int, None),
    "synth.num_utterances": (int, 250),
    "synth.dev": (int, 50),
    "synth.test": (int, 0),
    "synth.min_frames": (int, 30),
    "synth.max_frames": (int, 60),
    "synth.num_labels": (int, 5),
    "synth.mean_segment_frames": (float, 5.0),
    "synth.max_segment_frames": (int, 12),
    "synth.sharpness": (float, 2.0),
    "synth.transition_strength": (float, 0.0),
}
# per-level keys: templates.<N>, lambda.<N>, epochs.<N>
_LEVEL_KEYS: dict[str, Callable[[str], Any]] = {"templates": str, "lambda": float, "epochs": int}
_PATH_KEYS = ("data", "labels", "collapse")


@dataclass
class RunConfig:
    values: dict[str, Any]
    raw: dict[str, str]
    base: Path
    per_level: dict[tuple[str, int], Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def path(self, key: str) -> Path | None:
        v = self.values.get(key)
        if v is None:
            return None
        p = Path(v)
        return p if p.is_absolute() else self.base / p

    def level(self, key: str, n: int, default: Any = None) -> Any:
        return self.per_level.get((key, n), default)

    @property
    def out(self) -> Path:
        p = self.path("out")
        if p is None:
            raise ConfigError("config needs 'out'")
        return p

    def seg(self) -> SegmentationConfig:
        return SegmentationConfig(self["max_segment_frames"], self["min_segment_frames"])

    def templates(self, n: int) -> list:
        return template_set(self.level("templates", n, "level1" if n == 1 else "level2"))

    def train_config(self, n: int, collapse_ids=None) -> TrainConfig:
        return TrainConfig(self["step_sizes"], self.level("epochs", n, self["epochs"]), self["seed"],
                           self["cost"], self["patience"], collapse_ids)

    def smoothing(self) -> SmoothingConfig:
        return SmoothingConfig(k=self["lm.k"], discount=self["lm.discount"],
                               unigram_k=self["lm.unigram_k"])


def parse_config(text: str, base: Path = Path("."), check_paths: Sequence[str] = _PATH_KEYS) -> RunConfig:
    raw: dict[str, str] = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {n}: expected key=value, got {line!r}")
        key, val = (x.strip() for x in line.split("=", 1))
        if key in raw:
            raise ConfigError(f"config line {n}: duplicate key {key!r}")
        raw[key] = val
    values = {k: d for k, (_, d) in _SCALARS.items()}
    per_level: dict[tuple[str, int], Any] = {}
    for key, val in raw.items():
        m = re.fullmatch(r"(templates|lambda|epochs)\.(\d+)", key)
        try:
            if m:
                per_level[(m.group(1), int(m.group(2)))] = _LEVEL_KEYS[m.group(1)](val)
            elif key in _SCALARS:
                values[key] = _SCALARS[key][0](val)
            else:
                raise ConfigError(f"unknown config key {key!r}")
        except ValueError:
            raise ConfigError(f"bad value for {key!r}: {val!r}") from None
    cfg = RunConfig(values, raw, base, per_level)
    for key in check_paths:
        p = cfg.path(key)
        if p is not None and not p.exists():
            raise ConfigError(f"config key {key!r} points to missing path {p}")
    for (key, _), v in per_level.items():
        if key == "templates":
            try:
                template_set(v)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
    return cfg


def load_config(path: str, check_paths: Sequence[str] = _PATH_KEYS) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    return parse_config(p.read_text(encoding="utf-8"), p.parent, check_paths)


# ---------------------------------------------------------------------------
# staging and manifests


@contextmanager
def staged(target: Path) -> Iterator[Path]:
    """Yield a scratch directory that replaces ``target`` only on success."""
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.partial-", dir=target.parent))
    tmp.chmod(0o755)
    try:
        yield tmp
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if target.exists():
        shutil.rmtree(target)
    tmp.rename(target)


def _digest(p: Path) -> str:
    h = hashlib.sha256()
    files = sorted(x for x in p.rglob("*") if x.is_file()) if p.is_dir() else [p]
    for f in files:
        if f.name == "manifest.json":
            continue
        h.update(str(f.relative_to(p) if p.is_dir() else f.name).encode())
        h.update(f.read_bytes())
    return h.hexdigest()


def write_manifest(out_dir: Path, command: str, args: dict, cfg: RunConfig | None,
                   inputs: Sequence[Path], **extra: Any) -> None:
    doc = {
        "command": command,
        "arguments": {k: v for k, v in sorted(args.items()) if k not in ("func",)},
        "config": dict(sorted(cfg.raw.items())) if cfg is not None else {},
        "seed": cfg["seed"] if cfg is not None else None,
        "inputs": {str(p): _digest(p) for p in inputs if p.exists()},
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        **extra,
    }
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, default=str) + "\n",
                                           encoding="utf-8")


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# ---------------------------------------------------------------------------
# shared loading


def _corpus(cfg: RunConfig) -> Corpus:
    data = cfg.path("data")
    if data is None:
        raise ConfigError("config needs 'data' (corpus directory)")
    labels = read_labels(cfg.path("labels")) if cfg.path("labels") else None
    corpus = read_corpus(data, labels)
    seg = cfg.seg()
    for u in corpus.utterances.values():
        try:
            validate_gold(u.gold, u.num_frames, len(corpus.labels), seg)
        except ValueError as exc:
            raise ConfigError(f"utterance {u.uid}: {exc}") from None
    return corpus


def _collapse_ids(cfg: RunConfig, labels: LabelSet) -> dict[int, str] | None:
    p = cfg.path("collapse")
    if p is None:
        return None
    m = read_collapse(p)
    missing = [n for n in labels.names if n not in m]
    if missing:
        raise ConfigError(f"collapse map {p} has no entry for {missing}")
    return {labels.index(k): v for k, v in m.items() if k in labels.names}


def _level_graphs(cfg: RunConfig, corpus: Corpus, level: int, uids: Sequence[str],
                  graph_dir: Path | None = None) -> dict:
    if graph_dir is None and level == 1:
        seg = cfg.seg()
        k = len(corpus.labels)
        return {uid: build_full_space(corpus.utterances[uid].num_frames, k, seg) for uid in uids}
    d = graph_dir if graph_dir is not None else cfg.out / f"level{level}" / "graphs"
    if not d.is_dir():
        raise ConfigError(f"no graphs for level {level} at {d}; run prune and compose first")
    out = {}
    for uid in uids:
        p = d / f"{uid}.lat"
        if not p.exists():
            raise ConfigError(f"missing graph {p}")
        out[uid] = read_lattice(p, corpus.labels)
    return out


def _uids(corpus: Corpus, split: str) -> list[str]:
    uids = sorted(u.uid for u in corpus.split(split))
    if not uids:
        raise ConfigError(f"split {split!r} is empty")
    return uids


def _model(path: str) -> tuple[Model, int, Path]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"model file {p} does not exist")
    model, level = read_model(p)
    return model, level, p


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args, cfg: RunConfig) -> int:
    data = cfg.path("data")
    if data is None:
        raise ConfigError("config needs 'data' (where to write the corpus)")
    sc = SynthConfig(seed=cfg["seed"], num_utterances=cfg["synth.num_utterances"],
                     min_frames=cfg["synth.min_frames"], max_frames=cfg["synth.max_frames"],
                     num_labels=cfg["synth.num_labels"],
                     mean_segment_frames=cfg["synth.mean_segment_frames"],
                     max_segment_frames=cfg["synth.max_segment_frames"],
                     sharpness=cfg["synth.sharpness"],
                     transition_strength=cfg["synth.transition_strength"])
    n_dev, n_test = cfg["synth.dev"], cfg["synth.test"]
    if n_dev + n_test >= sc.num_utterances:
        raise ConfigError("synth.dev + synth.test must leave some training utterances")
    utts = generate(sc)
    n_train = sc.num_utterances - n_dev - n_test
    splits = {u.uid: ("train" if i < n_train else "dev" if i < n_train + n_dev else "test")
              for i, u in enumerate(utts)}
    labels = LabelSet(tuple(f"l{i}" for i in range(sc.num_labels)))
    with staged(data) as tmp:
        write_corpus(tmp, labels, utts, splits)
        write_manifest(tmp, "synth", vars(args), cfg, [])
    print(json.dumps({"utterances": len(utts), "train": n_train, "dev": n_dev, "test": n_test,
                      "data": str(data)}))
    return 0


def cmd_train(args, cfg: RunConfig) -> int:
    level = args.level
    if level < 1:
        raise ConfigError("--level must be >= 1")
    corpus = _corpus(cfg)
    train_u, dev_u = corpus.split("train"), corpus.split("dev")
    if not train_u:
        raise ConfigError("no training utterances")
    uids = sorted(u.uid for u in train_u + dev_u)
    graphs = _level_graphs(cfg, corpus, level, uids)
    layout = FeatureLayout(cfg.templates(level), len(corpus.labels), cfg["max_segment_frames"])
    collapse_ids = _collapse_ids(cfg, corpus.labels)
    tcfg = cfg.train_config(level, collapse_ids)
    insts = {uid: Instance.build(graphs[uid], corpus.utterances[uid], layout, tcfg.cost)
             for uid in uids}
    res = train_level([insts[u.uid] for u in train_u], [insts[u.uid] for u in dev_u], layout, tcfg,
                      initial_theta(layout, level > 1), level)
    target = cfg.out / f"level{level}" / "model"
    with staged(target) as tmp:
        write_model(tmp / "model.txt", res.model, level)
        write_jsonl(tmp / "train_log.jsonl", res.log)
        inputs = [cfg.path("data")] + ([cfg.out / f"level{level}" / "graphs"] if level > 1 else [])
        write_manifest(tmp, "train", vars(args), cfg, inputs, level=level,
                       selected={"step_size": res.step_size, "epoch": res.epoch,
                                 "dev_per": res.dev_per})
    print(json.dumps({"level": level, "step_size": res.step_size, "epoch": res.epoch,
                      "dev_per": res.dev_per, "model": str(target / "model.txt")}))
    return 0


def _decode_one(job):
    uid, g, model, fs, width = job
    w = FeatureTable.for_graph(model.layout, fs, g).scores(model.theta)
    if width is None:
        path, score = best_path(g, w)
        edges = path.edges
    else:
        res = beam_decode(g, width, w)
        edges, score = res.edges, res.score
    labs = [current_label(g.olabels[e]) for e in edges
            if g.ilabels[e] != EPS and current_label(g.olabels[e]) != EPS]
    return uid, labs, score


def cmd_decode(args, cfg: RunConfig) -> int:
    model, level, mpath = _model(args.model)
    corpus = _corpus(cfg)
    uids = _uids(corpus, args.split)
    gdir = Path(args.graphs) if args.graphs else None
    graphs = _level_graphs(cfg, corpus, level, uids, gdir)
    width = None if args.exact else (args.beam if args.beam is not None else cfg["beam"])
    if not args.exact and width is None:
        raise ConfigError("give --exact, --beam W, or 'beam' in the config")
    mode = "exact" if width is None else f"beam{width}"
    jobs = [(uid, graphs[uid], model, corpus.utterances[uid].scores, width) for uid in uids]
    results = _map(_decode_one, jobs, cfg["workers"])
    target = Path(args.out_dir) if args.out_dir else cfg.out / f"level{level}" / f"decode-{mode}"
    names = corpus.labels.name
    with staged(target) as tmp:
        write_transcripts(tmp / "hyp.txt", ((uid, [names(s) for s in labs]) for uid, labs, _ in results))
        write_jsonl(tmp / "scores.jsonl", ({"uid": uid, "score": sc, "mode": mode}
                                           for uid, _, sc in results))
        write_manifest(tmp, "decode", vars(args), cfg,
                       [mpath, cfg.path("data")] + ([gdir] if gdir else []), level=level)
    print(json.dumps({"level": level, "mode": mode, "utterances": len(results),
                      "hyp": str(target / "hyp.txt")}))
    return 0


def _prune_one(job):
    uid, g, model, fs, lam, gold, collapse_ids = job
    w = FeatureTable.for_graph(model.layout, fs, g).scores(model.theta)
    lattice, rep = prune_to_lattice(g, lam, w)
    rep.density, rep.oracle_error = lattice_metrics(lattice, gold, collapse_ids)
    rep.uid = uid
    return uid, lattice, rep


def cmd_prune(args, cfg: RunConfig) -> int:
    model, level, mpath = _model(args.model)
    lam = args.lam if args.lam is not None else cfg.level("lambda", level)
    if lam is None:
        raise ConfigError(f"give --lambda or 'lambda.{level}' in the config")
    if not 0.0 <= lam <= 1.0:
        raise ConfigError("lambda must lie in [0, 1]")
    corpus = _corpus(cfg)
    uids = _uids(corpus, args.split)
    graphs = _level_graphs(cfg, corpus, level, uids)
    collapse_ids = _collapse_ids(cfg, corpus.labels)
    jobs = [(uid, graphs[uid], model, corpus.utterances[uid].scores, lam,
             corpus.utterances[uid].labels, collapse_ids) for uid in uids]
    results = _map(_prune_one, jobs, cfg["workers"])
    target = Path(args.out_dir) if args.out_dir else cfg.out / f"level{level}" / "lattices"
    with staged(target) as tmp:
        for uid, lattice, _ in results:
            write_lattice(tmp / f"{uid}.lat", lattice, corpus.labels)
        write_jsonl(tmp / "prune_report.jsonl", (rep.to_json() for _, _, rep in results))
        write_manifest(tmp, "prune", vars(args), cfg, [mpath, cfg.path("data")], level=level,
                       lam=lam)
    dens = [r.density for _, _, r in results]
    orc = [r.oracle_error for _, _, r in results]
    print(json.dumps({"level": level, "lambda": lam, "utterances": len(results),
                      "mean_density": float(np.mean(dens)), "mean_oracle_error": float(np.mean(orc)),
                      "lattices": str(target)}))
    return 0


def _compose_one(job):
    uid, lattice, lm_graph = job
    return uid, sigma_compose(lattice, lm_graph)


def cmd_compose(args, cfg: RunConfig) -> int:
    src = Path(args.lattice_dir)
    if not src.is_dir():
        raise ConfigError(f"lattice directory {src} does not exist")
    level = 1
    man = src / "manifest.json"
    if man.exists():
        level = int(json.loads(man.read_text(encoding="utf-8")).get("level", 1))
    corpus = _corpus(cfg)
    lm_src = args.lm if args.lm is not None else cfg["lm"]
    if lm_src == "estimate":
        train_u = corpus.split("train")
        if not train_u:
            raise ConfigError("cannot estimate an LM without training utterances")
        lm = estimate_bigram_lm([u.labels for u in train_u], len(corpus.labels), cfg.smoothing())
        lm_inputs = [cfg.path("data")]
    else:
        lm_path = Path(lm_src)
        if not lm_path.is_absolute() and not lm_path.exists():
            lm_path = cfg.base / lm_path
        if not lm_path.exists():
            raise ConfigError(f"LM file {lm_path} does not exist")
        lm = read_lm(lm_path, corpus.labels)
        lm_inputs = [lm_path]
    lm_graph = build_bigram_lm_graph(lm, corpus.labels)
    uids = sorted(p.stem for p in src.glob("*.lat"))
    if not uids:
        raise ConfigError(f"no .lat files in {src}")
    jobs = [(uid, read_lattice(src / f"{uid}.lat", corpus.labels), lm_graph) for uid in uids]
    results = _map(_compose_one, jobs, cfg["workers"])
    target = Path(args.out_dir) if args.out_dir else cfg.out / f"level{level + 1}" / "graphs"
    with staged(target) as tmp:
        for uid, g in results:
            write_lattice(tmp / f"{uid}.lat", g, corpus.labels)
        write_lm(tmp / "lm.txt", lm, corpus.labels)
        write_manifest(tmp, "compose", vars(args), cfg, [src] + lm_inputs, level=level + 1)
    print(json.dumps({"level": level + 1, "utterances": len(results),
                      "edges": int(sum(g.num_edges for _, g in results)), "graphs": str(target)}))
    return 0


def cmd_eval(args, cfg: RunConfig | None) -> int:
    for p in (args.hyp, args.ref) + ((args.collapse,) if args.collapse else ()):
        if not Path(p).exists():
            raise ConfigError(f"input {p} does not exist")
    hyp, ref = read_transcripts(args.hyp), read_transcripts(args.ref)
    missing = sorted(set(hyp) - set(ref))
    if missing:
        raise FormatError(f"no reference for utterance(s) {missing[:5]}")
    cmap = read_collapse(args.collapse) if args.collapse else None
    pairs = []
    for uid in sorted(hyp):
        h, r = hyp[uid], ref[uid]
        if cmap is not None:
            h, r = collapse_seq(h, cmap), collapse_seq(r, cmap)
        pairs.append((h, r))
    c = corpus_per(pairs)
    report = {"utterances": len(pairs), "S": c.substitutions, "I": c.insertions,
              "D": c.deletions, "per": c.rate}
    target = Path(args.out_dir) if args.out_dir else Path(args.hyp).parent / "eval"
    with staged(target) as tmp:
        write_jsonl(tmp / "score.jsonl", [report])
        inputs = [Path(args.hyp), Path(args.ref)] + ([Path(args.collapse)] if args.collapse else [])
        write_manifest(tmp, "eval", vars(args), cfg, inputs)
    print(json.dumps(report, sort_keys=True))
    return 0


def _hit_one(job):
    uid, g, model, fs, width = job
    w = FeatureTable.for_graph(model.layout, fs, g).scores(model.theta)
    rec = compare_to_exact(g, width, w)
    return {"uid": uid, "beam_score": rec.beam_score, "exact_score": rec.exact_score,
            "hit": rec.hit, "frontier": max_frontier(g)}


def cmd_hitrate(args, cfg: RunConfig) -> int:
    model, level, mpath = _model(args.model)
    width = args.beam if args.beam is not None else cfg["beam"]
    if width is None or width < 1:
        raise ConfigError("give --beam W (W >= 1) or 'beam' in the config")
    corpus = _corpus(cfg)
    uids = _uids(corpus, args.split)
    graphs = _level_graphs(cfg, corpus, level, uids)
    jobs = [(uid, graphs[uid], model, corpus.utterances[uid].scores, width) for uid in uids]
    recs = _map(_hit_one, jobs, cfg["workers"])
    summary = {"summary": True, "width": width, "utterances": len(recs),
               "hit_rate": sum(r["hit"] for r in recs) / len(recs),
               "max_frontier": max(r["frontier"] for r in recs)}
    target = Path(args.out_dir) if args.out_dir else cfg.out / f"level{level}" / f"hitrate-beam{width}"
    with staged(target) as tmp:
        write_jsonl(tmp / "hitrate.jsonl", recs + [summary])
        write_manifest(tmp, "hitrate", vars(args), cfg, [mpath, cfg.path("data")], level=level)
    print(json.dumps(summary, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="segcascade", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def with_config(name: str, help_: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="key=value run configuration")
        sp.add_argument("--workers", type=int, default=None, help="override the config's worker count")
        return sp

    sp = with_config("synth", "generate a synthetic corpus")
    sp.set_defaults(func=cmd_synth)

    sp = with_config("train", "train one cascade level")
    sp.add_argument("--level", type=int, default=1)
    sp.set_defaults(func=cmd_train)

    sp = with_config("decode", "decode with a trained model")
    sp.add_argument("--model", required=True)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--beam", type=int, metavar="W")
    mode.add_argument("--exact", action="store_true")
    sp.add_argument("--graphs", help="decode graphs from this directory instead of the level's own")
    sp.add_argument("--split", default="all", choices=("all", "train", "dev", "test"))
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_decode)

    sp = with_config("prune", "prune graphs into lattices by max-marginals")
    sp.add_argument("--model", required=True)
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--split", default="all", choices=("all", "train", "dev", "test"))
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_prune)

    sp = with_config("compose", "compose lattices with a bigram LM")
    sp.add_argument("--lattice-dir", required=True)
    sp.add_argument("--lm", help="LM file, or 'estimate' to estimate from training transcripts")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_compose)

    sp = sub.add_parser("eval", help="score hypotheses against references")
    sp.add_argument("--hyp", required=True)
    sp.add_argument("--ref", required=True)
    sp.add_argument("--collapse")
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_eval, config=None, workers=None)

    sp = with_config("hitrate", "compare beam search with exact search")
    sp.add_argument("--model", required=True)
    sp.add_argument("--beam", type=int, metavar="W")
    sp.add_argument("--split", default="all", choices=("all", "train", "dev", "test"))
    sp.add_argument("--out-dir")
    sp.set_defaults(func=cmd_hitrate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = None
        if args.config is not None:
            # synth writes the corpus, so its data path need not exist yet
            checks = tuple(k for k in _PATH_KEYS if not (args.command == "synth" and k == "data"))
            cfg = load_config(args.config, checks)
            if args.workers is not None:
                cfg.values["workers"] = args.workers
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"segcascade {args.command}: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FormatError as exc:
        print(f"segcascade {args.command}: bad input: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (SegCascadeError, ValueError) as exc:
        print(f"segcascade {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"segcascade {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
