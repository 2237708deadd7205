"""Inverted dual embedded attention over token-level text and image features.

All functions accept a single sample (``d × dt`` and ``d × dv`` matrices) or
a batch with a leading axis; batch-norm statistics are then shared across the
batch and token axes.
"""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import core
from .config import ModelConfig
from .core import BatchNormState, ParameterStore, Tensor
from .errors import ShapeError


@contextmanager
def _stage(name: str):
    try:
        yield
    except ShapeError as exc:
        raise ShapeError(f"{name}: {exc}") from None


@dataclass
class IdeaParams:
    W_t: Tensor
    b_t: Tensor
    W_v: Tensor
    b_v: Tensor
    bn_text: BatchNormState
    bn_vis: BatchNormState
    W_sim: Tensor
    W_vis: Tensor
    b_vis: Tensor
    W_text: Tensor
    b_text: Tensor
    W_cross_v: Tensor
    b_cross_v: Tensor
    W_cross_t: Tensor
    b_cross_t: Tensor
    text_qkv: tuple[Tensor, Tensor, Tensor]
    vis_qkv: tuple[Tensor, Tensor, Tensor]
    t_ham: float = 1.65
    t_cam: float = 0.75

    @classmethod
    def create(cls, store: ParameterStore, cfg: ModelConfig, rng: np.random.Generator,
               dtype=np.float32, prefix: str = "idea") -> "IdeaParams":
        dt, dv, dse, d = cfg.dt, cfg.dv, cfg.d_se, cfg.d
        bn = dict(epsilon=cfg.bn_eps, momentum=cfg.bn_momentum)
        store.dense(f"{prefix}.proj_text", dt, dse, rng, dtype)
        store.dense(f"{prefix}.proj_vis", dv, dse, rng, dtype)
        store.batch_norm(f"{prefix}.bn_text", dse, dtype, **bn)
        store.batch_norm(f"{prefix}.bn_vis", dse, dtype, **bn)
        store.dense(f"{prefix}.sim", dse, d, rng, dtype, bias=False)
        store.dense(f"{prefix}.fuse_vis", 2 * dv, dv, rng, dtype)
        store.dense(f"{prefix}.fuse_text", 2 * dt, dt, rng, dtype)
        store.dense(f"{prefix}.cross_vis", dt + dv, dv, rng, dtype)
        store.dense(f"{prefix}.cross_text", dt + dv, dt, rng, dtype)
        for n in "qkv":
            store.dense(f"{prefix}.text_{n}", dt, dt, rng, dtype, bias=False)
        for n in "qkv":
            store.dense(f"{prefix}.vis_{n}", dv, dv, rng, dtype, bias=False)
        return cls.from_store(store, cfg.t_ham, cfg.t_cam, prefix)

    @classmethod
    def from_store(cls, store: ParameterStore, t_ham: float = 1.65, t_cam: float = 0.75,
                   prefix: str = "idea") -> "IdeaParams":
        """Bind to tensors already in ``store`` by name."""
        def g(name):
            return store[f"{prefix}.{name}"]
        return cls(
            g("proj_text.W"), g("proj_text.b"), g("proj_vis.W"), g("proj_vis.b"),
            store.bn[f"{prefix}.bn_text"], store.bn[f"{prefix}.bn_vis"], g("sim.W"),
            g("fuse_vis.W"), g("fuse_vis.b"), g("fuse_text.W"), g("fuse_text.b"),
            g("cross_vis.W"), g("cross_vis.b"), g("cross_text.W"), g("cross_text.b"),
            tuple(g(f"text_{n}.W") for n in "qkv"), tuple(g(f"vis_{n}.W") for n in "qkv"), t_ham, t_cam,
        )


@dataclass
class AttentionOutputs:
    S_sim: Tensor
    Att_ham: Tensor
    Att_cam: Tensor
    T_HAM: Tensor
    V_HAM: Tensor
    T_CAM: Tensor
    V_CAM: Tensor
    FAV: Tensor


def project_shared(H, W: Tensor, b: Tensor, bn: BatchNormState, mode: str = "train",
                   update_stats: bool = True) -> Tensor:
    """``tanh(batch_norm(H W + b))``."""
    with _stage("project_shared"):
        z = core.dense_forward(core.as_tensor(H), W, b)
    return core.tanh(core.batch_norm(z, bn, mode, update_stats=update_stats))


def similarity_matrix(H_text: Tensor, H_vis: Tensor, W_sim: Tensor) -> Tensor:
    """Row sums of ``H_vis + H_text`` squashed by tanh, broadcast over the shared
    axis, then projected by ``W_sim`` to a ``d × d`` matrix."""
    H_text, H_vis = core.as_tensor(H_text), core.as_tensor(H_vis)
    if H_text.shape != H_vis.shape:
        raise ShapeError(f"similarity_matrix: text {H_text.shape} vs visual {H_vis.shape}")
    if H_text.shape[-1] != W_sim.shape[0]:
        raise ShapeError(f"similarity_matrix: shared dim {H_text.shape[-1]} vs W_sim {W_sim.shape}")
    row = core.tanh(core.reduce_sum(core.add(H_vis, H_text), axis=-1, keepdims=True))
    s_hat = core.mul(row, np.ones(H_text.shape[-1], dtype=H_text.dtype))
    return core.matmul(s_hat, W_sim)


def harmonious_attention(S_sim, H_t, H_v, t_ham: float = 1.65) -> tuple[Tensor, Tensor]:
    A = core.softmax_temp(S_sim, t_ham)
    return core.matmul(A, H_t), core.matmul(A, H_v)


def contrary_attention(S_sim, H_t, H_v, t_cam: float = 0.75,
                       normalize: bool = True) -> tuple[Tensor, Tensor]:
    """Attention over the negated features; rows are L2-normalised unless ``normalize`` is False."""
    A = core.softmax_temp(S_sim, t_cam)
    T = core.matmul(A, core.neg(core.as_tensor(H_t)))
    V = core.matmul(A, core.neg(core.as_tensor(H_v)))
    if normalize:
        T, V = core.l2_normalize(T), core.l2_normalize(V)
    return T, V


def self_attention(X: Tensor, W_Q: Tensor, W_K: Tensor, W_V: Tensor) -> Tensor:
    """Scaled dot-product self-attention along axis -2."""
    Q, K, V = core.matmul(X, W_Q), core.matmul(X, W_K), core.matmul(X, W_V)
    scores = core.mul(core.matmul(Q, core.transpose(K)), 1.0 / np.sqrt(W_Q.shape[1]))
    return core.matmul(core.softmax_temp(scores, 1.0), V)


def fuse_attended(T_HAM, T_CAM, V_HAM, V_CAM, H_t, H_v, params: IdeaParams) -> Tensor:
    H_t, H_v = core.as_tensor(H_t), core.as_tensor(H_v)
    p = params
    with _stage("fuse_vis"):
        V_fuse = core.dense_forward(core.concat([V_HAM, V_CAM]), p.W_vis, p.b_vis, "tanh")
    with _stage("fuse_text"):
        T_fuse = core.dense_forward(core.concat([T_HAM, T_CAM]), p.W_text, p.b_text, "tanh")
    with _stage("cross_vis"):
        V_fusion = core.dense_forward(core.concat([T_fuse, H_v]), p.W_cross_v, p.b_cross_v, "tanh")
    with _stage("cross_text"):
        T_fusion = core.dense_forward(core.concat([V_fuse, H_t]), p.W_cross_t, p.b_cross_t, "tanh")
    with _stage("self_attention_text"):
        T_final = self_attention(core.mean_pool(T_fusion), *p.text_qkv)
    with _stage("self_attention_vis"):
        V_final = self_attention(core.mean_pool(V_fusion), *p.vis_qkv)
    fav = core.concat([T_final, V_final])
    if fav.data.ndim == 3:
        fav = core.reshape(fav, (fav.shape[0], fav.shape[2]))
    return fav


def idea_forward(H_t, H_v, params: IdeaParams, mode: str = "train",
                 update_stats: bool = True) -> AttentionOutputs:
    H_t, H_v = core.as_tensor(H_t), core.as_tensor(H_v)
    if H_t.shape[:-1] != H_v.shape[:-1]:
        raise ShapeError(f"idea: text {H_t.shape} and image {H_v.shape} disagree on token axis")
    p = params
    H_text = project_shared(H_t, p.W_t, p.b_t, p.bn_text, mode, update_stats)
    H_vis = project_shared(H_v, p.W_v, p.b_v, p.bn_vis, mode, update_stats)
    with _stage("similarity_matrix"):
        S = similarity_matrix(H_text, H_vis, p.W_sim)
    A_ham = core.softmax_temp(S, p.t_ham)
    A_cam = core.softmax_temp(S, p.t_cam)
    T_HAM, V_HAM = core.matmul(A_ham, H_t), core.matmul(A_ham, H_v)
    T_CAM = core.l2_normalize(core.matmul(A_cam, core.neg(H_t)))
    V_CAM = core.l2_normalize(core.matmul(A_cam, core.neg(H_v)))
    fav = fuse_attended(T_HAM, T_CAM, V_HAM, V_CAM, H_t, H_v, p)
    return AttentionOutputs(S, A_ham, A_cam, T_HAM, V_HAM, T_CAM, V_CAM, fav)
