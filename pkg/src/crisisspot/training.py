"""Adam, the joint training loop, evaluation metrics and Cohen's kappa."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import TrainConfig
from .core import ParameterStore
from .data import Corpus
from .errors import LabelError, NumericError, ParameterError
from .lexicons import Lexicons
from .model import Checkpoint, CrisisSpotModel, SplitData, prepare_split
from .social import SocialNormStats

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "train_loss", "val_accuracy", "val_precision", "val_recall",
                   "val_f1_macro", "val_f1_weighted")


# ---------------------------------------------------------------- optimiser

@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> AdamState:
    """One bias-corrected Adam update, applied in place.

    ``params`` maps names to Tensors (a ParameterStore works) or to arrays.
    Nothing is touched if any gradient is non-finite.
    """
    if lr < 0:
        raise ParameterError("learning rate must be >= 0")
    bad = [n for n, g in grads.items() if not np.isfinite(g).all()]
    if bad:
        raise NumericError(f"non-finite gradient in {', '.join(sorted(bad)[:5])}"
                           + (f" (+{len(bad) - 5} more)" if len(bad) > 5 else ""))
    store = params.params if isinstance(params, ParameterStore) else params
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1, c2 = 1 - b1 ** state.t, 1 - b2 ** state.t
    for name, g in grads.items():
        p = store[name]
        arr = p if isinstance(p, np.ndarray) else p.data
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(arr)
            state.v[name] = np.zeros_like(arr)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        if lr:
            arr -= (lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(arr.dtype)
    return state


# ---------------------------------------------------------------- metrics

@dataclass
class MetricsReport:
    accuracy: float
    precision_macro: float
    recall_macro: float
    f1_macro: float
    precision_weighted: float
    recall_weighted: float
    f1_weighted: float
    classes: list[int]
    per_class: dict[int, dict[str, float]]
    confusion: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision_macro": self.precision_macro, "recall_macro": self.recall_macro,
            "f1_macro": self.f1_macro, "precision_weighted": self.precision_weighted,
            "recall_weighted": self.recall_weighted, "f1_weighted": self.f1_weighted,
            "classes": self.classes,
            "per_class": {str(c): v for c, v in self.per_class.items()},
            "confusion": self.confusion.tolist(),
        }


def _safe_div(a, b):
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    return np.divide(a, b, out=np.zeros_like(a), where=b > 0)


def compute_metrics(y_true, y_pred, classes=None) -> MetricsReport:
    """Confusion-matrix metrics; rows are truth, columns predictions.

    The class set defaults to the union of both label sequences.  Classes with
    a zero denominator score 0.
    """
    y_true = np.asarray(y_true, dtype=np.int64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.int64).ravel()
    if len(y_true) == 0:
        raise ParameterError("cannot evaluate an empty split")
    if len(y_true) != len(y_pred):
        raise LabelError(f"{len(y_true)} labels vs {len(y_pred)} predictions")
    classes = sorted(set(y_true.tolist()) | set(y_pred.tolist())) if classes is None else sorted(classes)
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    np.add.at(cm, ([index[c] for c in y_true], [index[c] for c in y_pred]), 1)
    tp = np.diag(cm)
    support = cm.sum(axis=1)
    precision = _safe_div(tp, cm.sum(axis=0))
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    w = support / support.sum()
    per_class = {c: {"precision": float(precision[i]), "recall": float(recall[i]), "f1": float(f1[i]),
                     "support": int(support[i])} for i, c in enumerate(classes)}
    return MetricsReport(
        accuracy=float(tp.sum() / cm.sum()),
        precision_macro=float(precision.mean()), recall_macro=float(recall.mean()), f1_macro=float(f1.mean()),
        precision_weighted=float(w @ precision), recall_weighted=float(w @ recall), f1_weighted=float(w @ f1),
        classes=classes, per_class=per_class, confusion=cm,
    )


def cohen_kappa(annotations_a, annotations_b) -> float:
    a, b = list(annotations_a), list(annotations_b)
    if len(a) != len(b):
        raise LabelError(f"annotation lengths differ: {len(a)} vs {len(b)}")
    if not a:
        raise ParameterError("kappa needs at least one item")
    n = len(a)
    p_o = sum(x == y for x, y in zip(a, b)) / n
    cats = set(a) | set(b)
    p_e = sum((a.count(c) / n) * (b.count(c) / n) for c in cats)
    if p_e == 1:
        return 1.0
    return (p_o - p_e) / (1 - p_e)


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]
    model: CrisisSpotModel
    best_epoch: int
    first_batch_loss: float


def _batch_rng(seed: int, epoch: int, batch: int) -> np.random.Generator:
    return np.random.default_rng([seed, 4, epoch, batch])


def batch_loss(model: CrisisSpotModel, data: SplitData, idx, mode: str = "train", rng=None,
               aggregators=None, update_stats: bool = True):
    logits = model.forward(data, idx, mode, rng=rng, aggregators=aggregators, update_stats=update_stats)
    return model.loss(logits, data.labels[np.asarray(idx)])


def train(corpus: Corpus, config: TrainConfig, val: Corpus | None = None,
          lexicons: Lexicons | None = None, callback=None) -> TrainResult:
    """Joint end-to-end training; returns the checkpoint with the best validation weighted F1.

    Without a validation split the final epoch is kept.  ``callback(row)`` is
    called after every epoch with the history row.
    """
    lexicons = lexicons or Lexicons.default()
    if len(corpus) == 0:
        raise ParameterError("training split is empty")
    labels = corpus.labels(config.task)
    cfg = config.model_config(*corpus.dims)
    if config.task == "humanitarian" and labels.max() > cfg.n_classes:
        raise LabelError(f"humanitarian label {labels.max()} exceeds {cfg.n_classes} classes")
    norm = SocialNormStats.fit(corpus.records, lexicons)
    model = CrisisSpotModel.create(cfg, seed=config.seed)
    data = prepare_split(corpus, lexicons, norm, cfg)
    val_data = prepare_split(val, lexicons, norm, cfg) if val is not None and len(val) else None

    n, bs, seed = len(data), config.batch_size, config.seed
    # dry run: surfaces shape problems before any parameter moves
    model.forward(data, np.arange(min(bs, n)), "eval", update_stats=False)

    state = AdamState()
    history, best, best_f1, best_epoch, first_loss = [], None, -np.inf, 0, None
    graph_on = "graph" not in cfg.disabled_branches
    meta_base = {"train_config": config.to_dict(), "task": config.task}
    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([seed, 2, epoch]).permutation(n)
        aggs = model.aggregators(data, seed=[seed, 3, epoch]) if graph_on else None
        total = 0.0
        for j, start in enumerate(range(0, n, bs)):
            idx = order[start:start + bs]
            model.store.zero_grad()
            loss = batch_loss(model, data, idx, "train", _batch_rng(seed, epoch, j), aggs)
            if not np.isfinite(loss.data):
                raise NumericError(f"non-finite loss at epoch {epoch} batch {j}")
            loss.backward()
            if first_loss is None:
                first_loss = float(loss.data)
            grads = {name: t.grad if t.grad is not None else np.zeros_like(t.data)
                     for name, t in model.store.params.items()}
            adam_step(model.store, grads, state, config.learning_rate)
            total += float(loss.data) * len(idx)
        row = {"epoch": epoch, "train_loss": total / n}
        if val_data is not None:
            _, pred = model.predict(val_data)
            rep = compute_metrics(val_data.labels, pred)
            row.update(val_accuracy=rep.accuracy, val_precision=rep.precision_macro,
                       val_recall=rep.recall_macro, val_f1_macro=rep.f1_macro, val_f1_weighted=rep.f1_weighted)
            if rep.f1_weighted > best_f1:
                best_f1, best_epoch = rep.f1_weighted, epoch
                best = Checkpoint.from_model(model, norm, lexicons, {**meta_base, "epoch": epoch})
        history.append(row)
        log.info("epoch %d loss %.5f%s", epoch, row["train_loss"],
                 f" val_f1_w {row['val_f1_weighted']:.4f}" if "val_f1_weighted" in row else "")
        if callback is not None:
            callback(row)
    if best is None:
        best_epoch = config.epochs
        best = Checkpoint.from_model(model, norm, lexicons, {**meta_base, "epoch": best_epoch})
    return TrainResult(best, history, model, best_epoch, first_loss)


def evaluate(checkpoint: Checkpoint, corpus: Corpus, task: str | None = None) -> MetricsReport:
    cfg = checkpoint.model_config
    if task is not None and task != cfg.task:
        raise ParameterError(f"checkpoint was trained for {cfg.task!r}, not {task!r}")
    if len(corpus) == 0:
        raise ParameterError("cannot evaluate an empty split")
    model = checkpoint.build_model()
    data = prepare_split(corpus, checkpoint.lexicons, checkpoint.social, cfg)
    _, pred = model.predict(data)
    return compute_metrics(data.labels, pred)


def predict(checkpoint: Checkpoint, corpus: Corpus) -> list[dict]:
    """Per-post predictions in record order."""
    cfg = checkpoint.model_config
    model = checkpoint.build_model()
    data = prepare_split(corpus, checkpoint.lexicons, checkpoint.social, cfg, require_labels=False)
    probs, labels = model.predict(data)
    out = []
    for i, pid in enumerate(data.post_ids):
        row = {"post_id": pid, "label": int(labels[i])}
        if cfg.task == "informative":
            row["probability"] = float(probs[i])
        else:
            row["probabilities"] = [float(p) for p in probs[i]]
        out.append(row)
    return out


def write_history(path: str | Path, history: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS, restval="", lineterminator="\n")
        w.writeheader()
        for row in history:
            w.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})


def read_history(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: (float(v) if v else None) for k, v in row.items()} for row in csv.DictReader(fh)]
