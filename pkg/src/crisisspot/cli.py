"""``crisisspot`` command line.

Exit codes: 0 ok, 2 usage/parameter, 3 data, 4 numeric.  Failures print one
line ``error: <category>: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import FULL_DIMS, TrainConfig
from .data import SPLITS, Corpus, load_manifest, save_corpus
from .errors import CrisisSpotError, DataError, FormatError, LabelError, ParameterError, ResolutionError
from .graph import similarity_graph, write_edge_list
from .lexicons import Lexicons, expand_lexicon, load_crisis_lexicon, load_word_embeddings, save_crisis_lexicon
from .model import Checkpoint
from .social import SHV_COLUMNS, SocialNormStats, build_shv, ucis
from .synthetic import generate_synthetic
from .training import cohen_kappa, compute_metrics, evaluate, predict, train, write_history

log = logging.getLogger("crisisspot")

CHECKPOINT_NAME = "model.ckpt"
HISTORY_NAME = "history.csv"


def _dims(text: str) -> tuple[int, ...]:
    if text == "full":
        return tuple(FULL_DIMS.values())
    try:
        dims = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"dims must be 'full' or d,dt,dv,d_joint (got {text!r})") from None
    if len(dims) != 4:
        raise argparse.ArgumentTypeError("dims needs four comma-separated integers")
    return dims


def _split_of(path: str | Path) -> str:
    stem = Path(path).stem
    return stem if stem in SPLITS else "test"


def _load(path) -> Corpus:
    return load_manifest(path, _split_of(path))


def _lexicons(directory) -> Lexicons:
    return Lexicons.from_dir(directory) if directory else Lexicons.default()


def _emit(text: str, out) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    corpus = generate_synthetic(args.seed, args.n, args.task, args.dims, split=args.split,
                                separation=args.separation, scf_signal=args.scf_signal,
                                n_classes=args.n_classes)
    manifest = save_corpus(corpus, args.out, f"{args.split}.jsonl")
    labels = corpus.labels(args.task)
    counts = {int(k): int(v) for k, v in zip(*np.unique(labels, return_counts=True))}
    print(_json({"manifest": str(manifest), "records": len(corpus), "dims": list(corpus.dims),
                 "task": args.task, "label_counts": counts}), end="")
    return 0


def _train_config(args) -> TrainConfig:
    overrides = {"task": args.task, "seed": args.seed, "epochs": args.epochs, "learning_rate": args.lr,
                 "batch_size": args.batch_size, "train_manifest": args.train_manifest,
                 "val_manifest": args.val_manifest, "lexicon_dir": args.lexicons}
    if args.config:
        cfg = TrainConfig.from_json(args.config, **overrides)
        base = Path(args.config).parent
        for key in ("train_manifest", "val_manifest", "lexicon_dir"):
            value = getattr(cfg, key)
            if value and overrides[key] is None and not Path(value).is_absolute():
                setattr(cfg, key, str(base / value))
        return cfg
    return TrainConfig.from_dict({k: v for k, v in overrides.items() if v is not None})


def cmd_train(args) -> int:
    cfg = _train_config(args)
    if not cfg.train_manifest:
        raise ParameterError("no training manifest (set train_manifest in the config or pass --train-manifest)")
    corpus = load_manifest(cfg.train_manifest, "train")
    val = load_manifest(cfg.val_manifest, "val") if cfg.val_manifest else None
    result = train(corpus, cfg, val, lexicons=_lexicons(cfg.lexicon_dir))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result.checkpoint.save(out / CHECKPOINT_NAME)
    write_history(out / HISTORY_NAME, result.history)
    last = result.history[-1]
    print(_json({"checkpoint": str(out / CHECKPOINT_NAME), "history": str(out / HISTORY_NAME),
                 "epochs": len(result.history), "best_epoch": result.best_epoch,
                 "final_train_loss": last["train_loss"]}), end="")
    return 0


def _read_predictions(path) -> dict[str, int]:
    preds = {}
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise ResolutionError(f"predictions file not found: {path}") from None
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
            preds[str(row["post_id"])] = int(row["label"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            raise FormatError(f"{path}:{n}: expected a JSON object with post_id and label") from None
    return preds


def cmd_eval(args) -> int:
    corpus = _load(args.split)
    if args.predictions:
        if not args.task:
            raise ParameterError("--task is required with --predictions")
        preds = _read_predictions(args.predictions)
        missing = [r.post_id for r in corpus.records if r.post_id not in preds]
        if missing:
            raise LabelError(f"no prediction for post {missing[0]} ({len(missing)} missing)")
        report = compute_metrics(corpus.labels(args.task), [preds[r.post_id] for r in corpus.records])
    else:
        if not args.checkpoint:
            raise ParameterError("eval needs --checkpoint or --predictions")
        report = evaluate(Checkpoint.load(args.checkpoint), corpus, args.task)
    _emit(_json(report.to_dict()), args.out)
    return 0


def cmd_predict(args) -> int:
    rows = predict(Checkpoint.load(args.checkpoint), _load(args.manifest))
    _emit("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows), args.out)
    return 0


def cmd_score_social(args) -> int:
    corpus = _load(args.manifest)
    lex = _lexicons(args.lexicons)
    fit_on = _load(args.fit_manifest).records if args.fit_manifest else corpus.records
    norm = SocialNormStats.fit(fit_on, lex)
    header = ["post_id", *SHV_COLUMNS, "ucis"]
    lines = [",".join(header)]
    for r in corpus.records:
        shv = build_shv(r, lex, norm)
        row = [r.post_id] + [f"{v:.10g}" for v in shv.as_array()] + [f"{ucis(shv.uis, shv.cis, args.alpha):.10g}"]
        lines.append(",".join(row))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


def cmd_build_graph(args) -> int:
    corpus = _load(args.manifest)
    H = corpus.joint_text() if args.modality == "text" else corpus.joint_image()
    graph = similarity_graph(H, args.threshold)
    write_edge_list(args.out, graph)
    ids = Path(args.out).with_suffix(".nodes.txt")
    ids.write_text("".join(r.post_id + "\n" for r in corpus.records))
    print(_json({"nodes": graph.n, "edges": graph.n_edges, "isolated": int((graph.degree() == 0).sum()),
                 "edge_list": str(args.out), "node_ids": str(ids)}), end="")
    return 0


def cmd_expand_lexicon(args) -> int:
    seed = load_crisis_lexicon(args.seed_lexicon)
    expanded = expand_lexicon(seed, load_word_embeddings(args.embeddings), args.threshold)
    save_crisis_lexicon(args.out, expanded)
    print(_json({"seed_terms": len(seed), "terms": len(expanded), "added": len(expanded) - len(seed),
                 "out": str(args.out)}), end="")
    return 0


def _read_labels(path) -> list[str]:
    try:
        return [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    except FileNotFoundError:
        raise ResolutionError(f"annotation file not found: {path}") from None


def cmd_kappa(args) -> int:
    print(repr(cohen_kappa(_read_labels(args.a), _read_labels(args.b))))
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="crisisspot", description="Multimodal crisis-post classifier.",
                                formatter_class=fmt)
    p.add_argument("--threads", type=int, default=1, help="BLAS/OpenMP threads")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic corpus", formatter_class=fmt)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, required=True, help="number of records (>= 4)")
    g.add_argument("--task", choices=["informative", "humanitarian"], default="informative")
    g.add_argument("--dims", type=_dims, default="full", help="'full' (128,768,1024,512) or d,dt,dv,d_joint")
    g.add_argument("--split", choices=SPLITS, default="train")
    g.add_argument("--separation", type=float, default=4.0, help="class-mean distance in noise std units")
    g.add_argument("--scf-signal", type=float, default=0.9, help="chance the social cues follow the label")
    g.add_argument("--n-classes", type=int, default=None, help="humanitarian classes (default 8)")
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a model", formatter_class=fmt)
    t.add_argument("--config", default=None, help="JSON training config")
    t.add_argument("--task", choices=["informative", "humanitarian"], default=None)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--epochs", type=int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--batch-size", type=int, default=None)
    t.add_argument("--train-manifest", default=None)
    t.add_argument("--val-manifest", default=None)
    t.add_argument("--lexicons", default=None, help="lexicon directory (default: built-in)")
    t.add_argument("--out", required=True, help="output directory for checkpoint and history")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="metrics for a labelled manifest", formatter_class=fmt)
    e.add_argument("--checkpoint", default=None)
    e.add_argument("--split", required=True, help="labelled manifest to score")
    e.add_argument("--predictions", default=None, help="JSON-lines predictions to score instead of a checkpoint")
    e.add_argument("--task", choices=["informative", "humanitarian"], default=None)
    e.add_argument("--out", default=None, help="write JSON here instead of stdout")
    e.set_defaults(func=cmd_eval)

    pr = sub.add_parser("predict", help="per-post predictions", formatter_class=fmt)
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--manifest", required=True)
    pr.add_argument("--out", default=None)
    pr.set_defaults(func=cmd_predict)

    s = sub.add_parser("score-social", help="social holistic vectors as CSV", formatter_class=fmt)
    s.add_argument("--manifest", required=True)
    s.add_argument("--lexicons", default=None, help="lexicon directory (default: built-in)")
    s.add_argument("--fit-manifest", default=None, help="split used for normalisation (default: --manifest)")
    s.add_argument("--alpha", type=float, default=0.5, help="UIS weight in UCIS")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_score_social)

    b = sub.add_parser("build-graph", help="dump the similarity graph as an edge list", formatter_class=fmt)
    b.add_argument("--manifest", required=True)
    b.add_argument("--threshold", type=float, default=0.75)
    b.add_argument("--modality", choices=["text", "image"], default="text")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_build_graph)

    x = sub.add_parser("expand-lexicon", help="grow a crisis lexicon with nearby words", formatter_class=fmt)
    x.add_argument("--seed-lexicon", required=True)
    x.add_argument("--embeddings", required=True, help="GloVe-style text embeddings")
    x.add_argument("--threshold", type=float, default=0.8)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_expand_lexicon)

    k = sub.add_parser("kappa", help="Cohen's kappa of two label files", formatter_class=fmt)
    k.add_argument("--a", required=True, help="one label per line")
    k.add_argument("--b", required=True)
    k.set_defaults(func=cmd_kappa)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        with threadpool_limits(limits=max(1, args.threads)):
            return args.func(args)
    except CrisisSpotError as exc:
        print(f"error: {exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
