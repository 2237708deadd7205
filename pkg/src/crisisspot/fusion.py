"""Branch networks, prediction heads and losses."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .config import SHV_DIM, ModelConfig
from .core import ParameterStore, Tensor
from .errors import ShapeError
from .graph import mlp

PROB_CLIP = 1e-7


@dataclass
class FusionParams:
    maln: list[tuple[Tensor, Tensor]]
    shln: list[tuple[Tensor, Tensor]]
    jfln: list[tuple[Tensor, Tensor]]
    head: tuple[Tensor, Tensor]
    dropout: float = 0.2

    @classmethod
    def create(cls, store: ParameterStore, cfg: ModelConfig, rng, dtype=np.float32) -> "FusionParams":
        def stack(prefix, in_dim, widths):
            layers, prev = [], in_dim
            for i, w in enumerate(widths):
                layers.append(store.dense(f"{prefix}.{i}", prev, w, rng, dtype))
                prev = w
            return layers

        maln = stack("maln", cfg.fav_dim, cfg.maln)
        shln = stack("shln", SHV_DIM, cfg.shln)
        jfln = stack("jfln", cfg.jfln_in, cfg.jfln)
        head = store.dense("head", cfg.jfln[-1], cfg.out_dim, rng, dtype)
        return cls(maln, shln, jfln, head, cfg.dropout)


def _check_in(x: Tensor, layers, name: str) -> None:
    want = layers[0][0].shape[0]
    if x.shape[-1] != want:
        raise ShapeError(f"{name}: input width {x.shape[-1]}, expected {want}")


def maln(fav, params: FusionParams, mode: str = "eval", rng=None) -> Tensor:
    fav = core.as_tensor(fav)
    _check_in(fav, params.maln, "maln")
    return mlp(fav, params.maln, params.dropout, mode, rng)


def shln(shv, params: FusionParams, mode: str = "eval", rng=None) -> Tensor:
    shv = core.as_tensor(shv)
    _check_in(shv, params.shln, "shln")
    return mlp(shv, params.shln, params.dropout, mode, rng)


def jfln(m, s, g, params: FusionParams, mode: str = "eval", rng=None) -> Tensor:
    x = core.concat([core.as_tensor(m), core.as_tensor(s), core.as_tensor(g)])
    _check_in(x, params.jfln, "jfln")
    return mlp(x, params.jfln, params.dropout, mode, rng)


def logits(h, params: FusionParams) -> Tensor:
    W, b = params.head
    return core.dense_forward(core.as_tensor(h), W, b)


def predict_informative(logit) -> tuple[np.ndarray, np.ndarray]:
    """Sigmoid probability and the ``prob >= 0.5`` label."""
    prob = core.sigmoid(core.as_tensor(np.asarray(logit, dtype=np.float64))).data
    return prob, (prob >= 0.5).astype(np.int64)


def predict_humanitarian(logit) -> tuple[np.ndarray, np.ndarray]:
    """Softmax over classes; label is 1-based, lowest index on ties."""
    probs = core.softmax_temp(np.atleast_2d(np.asarray(logit, dtype=np.float64)), 1.0).data
    return probs, np.argmax(probs, axis=-1) + 1


def bce_loss(probs: Tensor, labels) -> Tensor:
    p = core.clip(core.as_tensor(probs), PROB_CLIP, 1 - PROB_CLIP)
    y = np.asarray(labels, dtype=p.dtype).reshape(p.shape)
    ll = core.add(core.mul(core.log(p), y), core.mul(core.log(core.add(core.neg(p), 1.0)), 1.0 - y))
    return core.neg(core.reduce_mean(ll))


def cce_loss(probs: Tensor, one_hot) -> Tensor:
    p = core.clip(core.as_tensor(probs), PROB_CLIP, 1 - PROB_CLIP)
    y = np.asarray(one_hot, dtype=p.dtype)
    if y.shape != p.shape:
        raise ShapeError(f"cce_loss: labels {y.shape} vs probabilities {p.shape}")
    per_sample = core.reduce_sum(core.mul(core.log(p), y), axis=-1)
    return core.neg(core.reduce_mean(per_sample))


def one_hot(labels, n_classes: int, dtype=np.float32) -> np.ndarray:
    """1-based labels to one-hot rows."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((len(labels), n_classes), dtype=dtype)
    out[np.arange(len(labels)), labels - 1] = 1
    return out
